use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refine::RefinePolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Shade,
    Lshade,
    /// Nelder-Mead with continuation only; returns a single solution.
    Nm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StopOn {
    #[default]
    Evals,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Member 0 is the problem's starting vector, the rest uniform in bounds.
    #[default]
    SeedCentered,
    Uniform,
}

/// Run configuration. Field names double as config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationOptions {
    pub method: Method,
    /// Evaluation budget; defaults to 1000 per free parameter when evaluations
    /// govern the run, unlimited when time does.
    pub max_fun_evals: Option<u64>,
    /// Wall-time cap in seconds.
    pub max_calibration_time: Option<f64>,
    pub stop_on: StopOn,
    pub num_results: usize,
    pub refine_best: bool,
    pub refine_prob: f64,
    /// Share of the budget spent by the population engine before refinement.
    pub engine_fraction: f64,
    pub init_mode: InitMode,
    pub seed: u64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            method: Method::Shade,
            max_fun_evals: None,
            max_calibration_time: None,
            stop_on: StopOn::Evals,
            num_results: 200,
            refine_best: true,
            refine_prob: 0.0,
            engine_fraction: 0.75,
            init_mode: InitMode::SeedCentered,
            seed: 0,
        }
    }
}

impl CalibrationOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidOptions(m));
        if self.max_fun_evals == Some(0) {
            return bad("max_fun_evals must be positive".into());
        }
        if let Some(t) = self.max_calibration_time {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!(
                    "max_calibration_time must be a positive number of seconds, got {t}"
                ));
            }
        }
        if self.stop_on == StopOn::Time && self.max_calibration_time.is_none() {
            return bad("stop_on = time requires max_calibration_time".into());
        }
        if !(self.engine_fraction > 0.0 && self.engine_fraction <= 1.0) {
            return bad(format!(
                "engine_fraction must lie in (0, 1], got {}",
                self.engine_fraction
            ));
        }
        let min_results = match self.method {
            Method::Shade => 4,
            Method::Lshade => 6,
            Method::Nm => 1,
        };
        if self.num_results < min_results {
            return bad(format!(
                "num_results must be at least {min_results} for this method, got {}",
                self.num_results
            ));
        }
        self.refine_policy().validate()
    }

    pub fn refine_policy(&self) -> RefinePolicy {
        RefinePolicy {
            refine_best: self.refine_best,
            refine_prob: self.refine_prob,
        }
    }

    /// Evaluation limit for a problem with `dim` free parameters.
    pub fn effective_max_evals(&self, dim: usize) -> u64 {
        match (self.max_fun_evals, self.stop_on) {
            (Some(n), _) => n,
            (None, StopOn::Evals) => 1000 * dim as u64,
            (None, StopOn::Time) => u64::MAX,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let opts: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::schema(e.path().to_string(), e.inner().to_string()))?;
        opts.validate()?;
        Ok(opts)
    }
}
