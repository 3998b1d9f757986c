use std::collections::BTreeMap;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use super::data::{DatasetCollection, DatasetKind};
use crate::error::{Error, Result};

/// Predictions aligned 1:1 with the observations of a [`DatasetCollection`].
pub type Predictions = Vec<Vec<f64>>;

/// Deterministic map from a full parameter vector to predictions.
///
/// Implementations must be pure: the engines call them from several worker
/// threads at once.
pub trait PredictionModel: Send + Sync + Debug {
    fn id(&self) -> &str;

    /// Cheap feasibility check applied before any prediction. Rejected
    /// vectors get an infinite loss and do not count against the budget.
    fn accepts(&self, _full: &[f64]) -> bool {
        true
    }

    /// Raw predictions. Shape and finiteness are checked by the caller.
    fn predict(
        &self,
        full: &[f64],
        data: &DatasetCollection,
    ) -> std::result::Result<Predictions, String>;
}

/// Model id plus model-specific constants, as stored in problem files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub id: String,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

impl ModelSpec {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            constants: BTreeMap::new(),
        }
    }

    pub fn with_constant(mut self, key: impl Into<String>, value: f64) -> Self {
        self.constants.insert(key.into(), value);
        self
    }

    fn constant(&self, key: &str, default: f64) -> f64 {
        self.constants.get(key).copied().unwrap_or(default)
    }

    /// Resolves the spec against the built-in model registry.
    pub fn build(&self) -> Result<Box<dyn PredictionModel>> {
        let allowed: &[&str] = match self.id.as_str() {
            "toy_growth" | "multi_basin_growth" => &["zero_variate_age", "max_rate_shape"],
            "himmelblau" => &["offset"],
            other => return Err(Error::UnknownModel(other.to_string())),
        };
        if let Some(k) = self
            .constants
            .keys()
            .find(|k| !allowed.contains(&k.as_str()))
        {
            return Err(Error::InvalidData {
                dataset: format!("model:{}", self.id),
                reason: format!("unknown model constant `{k}`"),
            });
        }
        Ok(match self.id.as_str() {
            "toy_growth" => Box::new(GrowthCurve {
                rate: RateForm::Direct,
                zero_variate_age: self.constant("zero_variate_age", 365.0),
                max_rate_shape: self.constant("max_rate_shape", 0.3),
            }),
            "multi_basin_growth" => Box::new(GrowthCurve {
                rate: RateForm::Squared,
                zero_variate_age: self.constant("zero_variate_age", 365.0),
                max_rate_shape: self.constant("max_rate_shape", 0.3),
            }),
            _ => Box::new(Himmelblau {
                offset: self.constant("offset", 1.0),
            }),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RateForm {
    /// Second parameter is the rate `r`.
    Direct,
    /// Second parameter is `s` with `r = s^2`, so `s` and `-s` give the same curve.
    Squared,
}

/// Saturating growth `W(t) = w_max * (1 - exp(-r (t - t0)))^b`, zero before `t0`.
///
/// Parameters in order: `w_max`, rate (`r` or `s`), `t0`, `b`. Uni-variate
/// datasets are weight against time; zero-variate datasets are the weight at
/// `zero_variate_age`. The filter rejects `r * b > max_rate_shape`.
#[derive(Debug, Clone)]
pub struct GrowthCurve {
    rate: RateForm,
    zero_variate_age: f64,
    max_rate_shape: f64,
}

impl GrowthCurve {
    fn rate(&self, p: f64) -> f64 {
        match self.rate {
            RateForm::Direct => p,
            RateForm::Squared => p * p,
        }
    }

    pub fn weight(w_max: f64, r: f64, t0: f64, b: f64, t: f64) -> f64 {
        let base = 1.0 - (-r * (t - t0)).exp();
        if base <= 0.0 {
            0.0
        } else {
            w_max * base.powf(b)
        }
    }
}

impl PredictionModel for GrowthCurve {
    fn id(&self) -> &str {
        match self.rate {
            RateForm::Direct => "toy_growth",
            RateForm::Squared => "multi_basin_growth",
        }
    }

    fn accepts(&self, full: &[f64]) -> bool {
        full.len() == 4 && self.rate(full[1]) * full[3] <= self.max_rate_shape
    }

    fn predict(
        &self,
        full: &[f64],
        data: &DatasetCollection,
    ) -> std::result::Result<Predictions, String> {
        let [w_max, p, t0, b] = <[f64; 4]>::try_from(full)
            .map_err(|_| format!("expected 4 parameters, got {}", full.len()))?;
        let r = self.rate(p);
        Ok(data
            .iter()
            .map(|ds| match (ds.kind, &ds.x) {
                (DatasetKind::UniVariate, Some(x)) => x
                    .iter()
                    .map(|&t| Self::weight(w_max, r, t0, b, t))
                    .collect(),
                _ => vec![Self::weight(w_max, r, t0, b, self.zero_variate_age)],
            })
            .collect())
    }
}

/// Himmelblau's function shifted by `offset`, predicted for every point.
///
/// With the observation equal to `offset`, the loss vanishes exactly at the
/// four global minima of the surface.
#[derive(Debug, Clone)]
pub struct Himmelblau {
    offset: f64,
}

impl Himmelblau {
    pub const MINIMA: [[f64; 2]; 4] = [
        [3.0, 2.0],
        [-2.805118086952745, 3.131312518250573],
        [-3.779310253377747, -3.28318599128617],
        [3.584428340330492, -1.848126526964404],
    ];

    pub fn surface(x: f64, y: f64) -> f64 {
        (x * x + y - 11.0).powi(2) + (x + y * y - 7.0).powi(2)
    }
}

impl PredictionModel for Himmelblau {
    fn id(&self) -> &str {
        "himmelblau"
    }

    fn predict(
        &self,
        full: &[f64],
        data: &DatasetCollection,
    ) -> std::result::Result<Predictions, String> {
        let [x, y] = <[f64; 2]>::try_from(full)
            .map_err(|_| format!("expected 2 parameters, got {}", full.len()))?;
        let v = self.offset + Self::surface(x, y);
        Ok(data.iter().map(|ds| vec![v; ds.len()]).collect())
    }
}
