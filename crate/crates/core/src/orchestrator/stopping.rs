use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::options::CalibrationOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Evaluation budget reached.
    Evals,
    /// Wall-time cap reached.
    Time,
    /// Refinement stopped improving before either cap.
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCheck {
    Continue,
    Stop(StopReason),
}

/// Stops once either configured cap is reached, whether or not the search
/// has converged. When both are reached the governing criterion (`stop_on`)
/// is reported.
pub fn check_stopping(
    evals: u64,
    elapsed: Duration,
    options: &CalibrationOptions,
    dim: usize,
) -> StopCheck {
    let by_evals = evals >= options.effective_max_evals(dim);
    let by_time = options
        .max_calibration_time
        .is_some_and(|t| elapsed.as_secs_f64() >= t);
    match (by_evals, by_time) {
        (true, true) if options.stop_on == super::StopOn::Time => StopCheck::Stop(StopReason::Time),
        (true, _) => StopCheck::Stop(StopReason::Evals),
        (false, true) => StopCheck::Stop(StopReason::Time),
        (false, false) => StopCheck::Continue,
    }
}
