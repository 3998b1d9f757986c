use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::options::CalibrationOptions;
use super::stopping::StopReason;
use crate::error::{Error, Result};
use crate::loss::{mre, smse};
use crate::objective::{Problem, ProblemFile};

pub const SOLUTION_SCHEMA_VERSION: &str = "1";

/// Report metrics of one solution; `None` when a metric is undefined
/// (zero denominators or a failed prediction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub mre: Option<f64>,
    pub smse: Option<f64>,
}

impl Metrics {
    pub fn of(problem: &Problem, free_values: &[f64]) -> Self {
        match problem.predict(free_values) {
            Ok(p) => Self {
                mre: mre(problem.data(), &p).ok(),
                smse: smse(problem.data(), &p).ok(),
            },
            Err(_) => Self {
                mre: None,
                smse: None,
            },
        }
    }
}

/// Full parameter record of one returned solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionRecord {
    pub parameters: BTreeMap<String, f64>,
    pub loss: f64,
    pub metrics: Metrics,
}

/// Run metadata and per-solution detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunResults {
    pub problem: ProblemFile,
    pub options: CalibrationOptions,
    pub seed: u64,
    pub evaluations: u64,
    pub generations: usize,
    pub stop_reason: StopReason,
    pub best: Metrics,
    pub solutions: Vec<SolutionRecord>,
}

/// Diverse set of calibrated parameter vectors, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionSet {
    pub schema_version: String,
    pub set_size: usize,
    /// Names of the calibrated (free) parameters, in vector order.
    pub par_names: Vec<String>,
    pub solutions_set: Vec<Vec<f64>>,
    pub fun_values: Vec<f64>,
    pub results: RunResults,
}

impl SolutionSet {
    pub fn problem(&self) -> Result<Problem> {
        Problem::from_file(self.results.problem.clone())
    }

    pub fn best(&self) -> Option<(&[f64], f64)> {
        self.solutions_set
            .first()
            .map(|v| (v.as_slice(), self.fun_values[0]))
    }

    /// Checks every structural and semantic invariant, naming the offending
    /// field.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SOLUTION_SCHEMA_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.schema_version.clone(),
                expected: SOLUTION_SCHEMA_VERSION.into(),
            });
        }
        let problem = self
            .problem()
            .map_err(|e| Error::schema("results.problem", e.to_string()))?;
        self.results
            .options
            .validate()
            .map_err(|e| Error::schema("results.options", e.to_string()))?;
        if self.results.seed != self.results.options.seed {
            return Err(Error::schema(
                "results.seed",
                "does not match results.options.seed",
            ));
        }
        let n = self.set_size;
        if n == 0 {
            return Err(Error::schema("set_size", "must be at least 1"));
        }
        for (path, len) in [
            ("solutions_set", self.solutions_set.len()),
            ("fun_values", self.fun_values.len()),
            ("results.solutions", self.results.solutions.len()),
        ] {
            if len != n {
                return Err(Error::schema(
                    path,
                    format!("has {len} entries but set_size is {n}"),
                ));
            }
        }
        let space = problem.space();
        if self.par_names != space.free_names() {
            return Err(Error::schema(
                "par_names",
                format!("expected {:?}", space.free_names()),
            ));
        }
        for (i, (v, &f)) in self.solutions_set.iter().zip(&self.fun_values).enumerate() {
            if v.len() != space.dim() {
                return Err(Error::schema(
                    format!("solutions_set[{i}]"),
                    format!("has {} values, expected {}", v.len(), space.dim()),
                ));
            }
            if !space.contains(v) {
                return Err(Error::schema(
                    format!("solutions_set[{i}]"),
                    "lies outside the parameter bounds",
                ));
            }
            if !problem.accepts(v) {
                return Err(Error::schema(
                    format!("solutions_set[{i}]"),
                    "rejected by the model filter",
                ));
            }
            if !f.is_finite() || f < 0.0 {
                return Err(Error::schema(
                    format!("fun_values[{i}]"),
                    format!("invalid loss {f}"),
                ));
            }
            if i > 0 && f < self.fun_values[i - 1] {
                return Err(Error::schema(
                    format!("fun_values[{i}]"),
                    "values are not sorted ascending",
                ));
            }
            let rec = &self.results.solutions[i];
            if rec.loss != f {
                return Err(Error::schema(
                    format!("results.solutions[{i}].loss"),
                    "differs from fun_values",
                ));
            }
            let full = space.assemble(v)?;
            for (p, value) in space.parameters().iter().zip(&full) {
                match rec.parameters.get(&p.name) {
                    Some(x) if x == value => {}
                    Some(_) => {
                        return Err(Error::schema(
                            format!("results.solutions[{i}].parameters.{}", p.name),
                            "disagrees with solutions_set",
                        ))
                    }
                    None => {
                        return Err(Error::schema(
                            format!("results.solutions[{i}].parameters.{}", p.name),
                            "missing",
                        ))
                    }
                }
            }
            if rec.parameters.len() != full.len() {
                return Err(Error::schema(
                    format!("results.solutions[{i}].parameters"),
                    "has unknown parameters",
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::schema("", e.to_string()))?;
        if let Some(v) = probe.get("schema_version").and_then(|v| v.as_str()) {
            if v != SOLUTION_SCHEMA_VERSION {
                return Err(Error::UnsupportedVersion {
                    found: v.into(),
                    expected: SOLUTION_SCHEMA_VERSION.into(),
                });
            }
        }
        let set: Self = serde_path_to_error::deserialize(probe)
            .map_err(|e| Error::schema(e.path().to_string(), e.inner().to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }
}
