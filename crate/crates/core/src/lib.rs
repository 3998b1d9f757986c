//! Multimodal calibration of model parameters against multi-dataset
//! observations.
//!
//! The population engines (SHADE and L-SHADE) keep a diverse archive of
//! near-optimal parameter vectors; a bounded Nelder-Mead with restarts
//! polishes selected members. Runs are seed-deterministic regardless of how
//! many worker threads evaluate the objective.

pub mod analytics;
pub mod bench;
pub mod charts;
mod error;
pub mod evolution;
pub mod loss;
pub mod objective;
pub mod orchestrator;
pub mod refine;

pub use error::{Error, Result};
