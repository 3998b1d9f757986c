use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One calibration parameter in model units.
///
/// `value` is the starting value when the parameter is free and the held
/// value when it is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub value: f64,
    #[serde(default = "default_free")]
    pub free: bool,
}

fn default_free() -> bool {
    true
}

impl Parameter {
    pub fn free(name: impl Into<String>, lower: f64, upper: f64, value: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            value,
            free: true,
        }
    }

    pub fn fixed(name: impl Into<String>, lower: f64, upper: f64, value: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            value,
            free: false,
        }
    }
}

/// Box-bounded parameter space with a free/fixed mask.
///
/// Engines work on the `D` free coordinates only; [`ParameterSpace::assemble`]
/// rebuilds the full vector the model consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    params: Vec<Parameter>,
    free_idx: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterSpace {
    pub fn new(params: Vec<Parameter>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &params {
            if !seen.insert(p.name.as_str()) {
                return Err(Error::InvalidSpace(format!(
                    "duplicate parameter name `{}`",
                    p.name
                )));
            }
            if ![p.lower, p.upper, p.value].iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidSpace(format!(
                    "parameter `{}` has non-finite bounds or value",
                    p.name
                )));
            }
            if p.free && p.lower >= p.upper {
                return Err(Error::InvalidSpace(format!(
                    "free parameter `{}` needs lower < upper (got {} >= {})",
                    p.name, p.lower, p.upper
                )));
            }
            if p.free && !(p.lower..=p.upper).contains(&p.value) {
                return Err(Error::InvalidSpace(format!(
                    "initial value {} of `{}` lies outside [{}, {}]",
                    p.value, p.name, p.lower, p.upper
                )));
            }
        }
        let free_idx: Vec<usize> = params
            .iter()
            .enumerate()
            .filter(|(_, p)| p.free)
            .map(|(i, _)| i)
            .collect();
        if free_idx.is_empty() {
            return Err(Error::InvalidSpace(
                "at least one parameter must be free".into(),
            ));
        }
        let lower = free_idx.iter().map(|&i| params[i].lower).collect();
        let upper = free_idx.iter().map(|&i| params[i].upper).collect();
        Ok(Self {
            params,
            free_idx,
            lower,
            upper,
        })
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    /// Number of free parameters.
    pub fn dim(&self) -> usize {
        self.free_idx.len()
    }

    /// Number of parameters, free and fixed.
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn free_names(&self) -> Vec<String> {
        self.free_idx
            .iter()
            .map(|&i| self.params[i].name.clone())
            .collect()
    }

    /// Position of a free parameter among the free coordinates.
    pub fn free_position(&self, name: &str) -> Result<usize> {
        match self.params.iter().position(|p| p.name == name) {
            None => Err(Error::UnknownParameter {
                name: name.into(),
                valid: self.free_names(),
            }),
            Some(full) => self
                .free_idx
                .iter()
                .position(|&i| i == full)
                .ok_or_else(|| Error::FixedParameter(name.into())),
        }
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn range(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    /// Starting values of the free parameters.
    pub fn initial_free(&self) -> Vec<f64> {
        self.free_idx
            .iter()
            .map(|&i| self.params[i].value)
            .collect()
    }

    pub fn assemble(&self, free_values: &[f64]) -> Result<Vec<f64>> {
        if free_values.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: free_values.len(),
            });
        }
        let mut full: Vec<f64> = self.params.iter().map(|p| p.value).collect();
        for (&slot, &v) in self.free_idx.iter().zip(free_values) {
            full[slot] = v;
        }
        Ok(full)
    }

    pub fn extract_free(&self, full: &[f64]) -> Result<Vec<f64>> {
        if full.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: full.len(),
            });
        }
        Ok(self.free_idx.iter().map(|&i| full[i]).collect())
    }

    pub fn contains(&self, free_values: &[f64]) -> bool {
        free_values.len() == self.dim()
            && free_values
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| (*lo..=*hi).contains(v))
    }

    /// Midpoint reflection of an out-of-bounds trial towards its parent.
    ///
    /// A coordinate below `lower` becomes `(lower + parent) / 2`, above `upper`
    /// becomes `(upper + parent) / 2`. In-bounds coordinates are untouched, so
    /// the repair is idempotent.
    pub fn clamp_to_bounds(&self, trial: &[f64], parent: &[f64]) -> Vec<f64> {
        trial
            .iter()
            .zip(parent)
            .enumerate()
            .map(|(k, (&v, &p))| {
                let (lo, hi) = (self.lower[k], self.upper[k]);
                if v < lo {
                    0.5 * (lo + p.clamp(lo, hi))
                } else if v > hi {
                    0.5 * (hi + p.clamp(lo, hi))
                } else {
                    v
                }
            })
            .collect()
    }

    /// Projection onto the box (plain clipping).
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(k, x)| x.clamp(self.lower[k], self.upper[k]))
            .collect()
    }

    /// Maps free coordinates to `[0, 1]` per axis.
    pub fn normalize(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(k, x)| (x - self.lower[k]) / self.range(k))
            .collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.lower[k] + rng.random::<f64>() * self.range(k))
            .collect()
    }

    /// Copy of the space with one parameter edited by `f`.
    pub fn with_parameter(&self, name: &str, f: impl FnOnce(&mut Parameter)) -> Result<Self> {
        let mut params = self.params.clone();
        let p =
            params
                .iter_mut()
                .find(|p| p.name == name)
                .ok_or_else(|| Error::UnknownParameter {
                    name: name.into(),
                    valid: self.names(),
                })?;
        f(p);
        Self::new(params)
    }
}
