//! Calibration problem definition: parameter space, observations and the
//! prediction model that links them.

pub mod builtin;
mod data;
mod model;
mod problem;
mod space;

pub use data::{Dataset, DatasetCollection, DatasetKind};
pub use model::{GrowthCurve, Himmelblau, ModelSpec, PredictionModel, Predictions};
pub use problem::{predict, Problem, ProblemFile, PROBLEM_SCHEMA_VERSION};
pub use space::{Parameter, ParameterSpace};
