//! Success-history adaptive differential evolution (SHADE) and its linear
//! population size reduction variant (L-SHADE), plus the diversity-preserving
//! result archive.

mod archive;
mod engine;
mod history;
mod operators;

pub use archive::SolutionArchive;
pub use engine::{
    lshade_population_size, run_engine, shade_generation, EngineConfig, EngineRun, EngineState,
    GenerationReport, Limits, Parallelism, TraceRecord, Variant,
};
pub use history::{Success, SuccessHistory};
pub use operators::{
    crossover_binomial, mutate_current_to_pbest, pick_indices, sort_candidates, Candidate,
    ExternalArchive, Picks,
};
