//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),

    #[error("invalid dataset `{dataset}`: {reason}")]
    InvalidData { dataset: String, reason: String },

    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    #[error("parameter vector rejected by the feasibility filter")]
    FilterRejected,

    #[error("prediction failed: {0}")]
    PredictionFailure(String),

    #[error("division by zero in dataset `{dataset}`: {reason}")]
    ZeroDenominator { dataset: String, reason: String },

    #[error("no feasible solution was found within the budget")]
    NoFeasibleSolution,

    #[error("evaluation budget exhausted ({limit} evaluations)")]
    BudgetExhausted { limit: u64 },

    #[error("population of {size} members is too small (need at least 4)")]
    EngineTooSmall { size: usize },

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("unknown parameter `{name}`; valid parameters: {}", valid.join(", "))]
    UnknownParameter { name: String, valid: Vec<String> },

    #[error("parameter `{0}` is fixed, not calibrated")]
    FixedParameter(String),

    #[error("selected solutions are infeasible: {}", offenders.iter().map(|(i, why)| format!("#{i}: {why}")).collect::<Vec<_>>().join("; "))]
    InfeasibleSelection { offenders: Vec<(usize, String)> },

    #[error("selection index {index} out of range (set has {size} solutions)")]
    SelectionOutOfRange { index: usize, size: usize },

    #[error("empty selection")]
    EmptySelection,

    #[error("empty solution set")]
    EmptySet,

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("unsupported schema version `{found}` (expected `{expected}`)")]
    UnsupportedVersion { found: String, expected: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the caller's input (bad files, options or
    /// selections) rather than by a failure while running.
    pub fn is_input(&self) -> bool {
        !matches!(
            self,
            Error::FilterRejected
                | Error::PredictionFailure(_)
                | Error::ZeroDenominator { .. }
                | Error::BudgetExhausted { .. }
                | Error::NoFeasibleSolution
                | Error::EngineTooSmall { .. }
                | Error::Io { .. }
        )
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
