use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// A single observed scalar.
    ZeroVariate,
    /// `(x_j, d_j)` pairs with strictly increasing `x`.
    UniVariate,
}

/// One observation set with per-point weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub id: String,
    pub kind: DatasetKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    pub observed: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    id: String,
    kind: DatasetKind,
    #[serde(default)]
    x: Option<Vec<f64>>,
    observed: Vec<f64>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

impl<'de> Deserialize<'de> for Dataset {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let raw = RawDataset::deserialize(deserializer)?;
        let built = match raw.kind {
            DatasetKind::ZeroVariate if raw.x.is_some() => {
                return Err(serde::de::Error::custom(format!(
                    "zero-variate dataset `{}` must not carry x",
                    raw.id
                )))
            }
            DatasetKind::ZeroVariate => {
                Dataset::zero_variate(raw.id, raw.observed.first().copied().unwrap_or(f64::NAN))
            }
            DatasetKind::UniVariate => {
                let x = raw.x.ok_or_else(|| {
                    serde::de::Error::custom(format!("uni-variate dataset `{}` needs x", raw.id))
                })?;
                Dataset::uni_variate(raw.id, x, raw.observed.clone())
            }
        };
        let mut ds = built.map_err(serde::de::Error::custom)?;
        if raw.kind == DatasetKind::ZeroVariate && raw.observed.len() != 1 {
            return Err(serde::de::Error::custom(format!(
                "zero-variate dataset `{}` needs exactly one observation, got {}",
                ds.id,
                raw.observed.len()
            )));
        }
        if let Some(w) = raw.weights {
            ds = ds.with_weights(w).map_err(serde::de::Error::custom)?;
        }
        Ok(ds)
    }
}

impl Dataset {
    pub fn zero_variate(id: impl Into<String>, value: f64) -> Result<Self> {
        let ds = Self {
            id: id.into(),
            kind: DatasetKind::ZeroVariate,
            x: None,
            observed: vec![value],
            weights: vec![1.0],
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Uni-variate dataset with default weights `1 / n`.
    pub fn uni_variate(id: impl Into<String>, x: Vec<f64>, observed: Vec<f64>) -> Result<Self> {
        let n = observed.len();
        let ds = Self {
            id: id.into(),
            kind: DatasetKind::UniVariate,
            x: Some(x),
            observed,
            weights: vec![1.0 / n.max(1) as f64; n],
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.weights = weights;
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    /// `w_i`, the summed weight of the dataset.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `d_i`, the mean observation.
    pub fn mean_observed(&self) -> f64 {
        self.observed.iter().sum::<f64>() / self.len() as f64
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidData {
            dataset: self.id.clone(),
            reason: reason.into(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.observed.is_empty() {
            return Err(self.invalid("needs at least one observation"));
        }
        if self.observed.iter().any(|v| !v.is_finite()) {
            return Err(self.invalid("observations must be finite"));
        }
        if self.weights.len() != self.observed.len() {
            return Err(self.invalid(format!(
                "{} weights for {} observations",
                self.weights.len(),
                self.observed.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(self.invalid("weights must be finite and non-negative"));
        }
        match (&self.kind, &self.x) {
            (DatasetKind::ZeroVariate, None) if self.observed.len() == 1 => {}
            (DatasetKind::ZeroVariate, _) => {
                return Err(self.invalid("zero-variate data is one scalar without x"))
            }
            (DatasetKind::UniVariate, Some(x)) => {
                if x.len() != self.observed.len() {
                    return Err(self.invalid(format!(
                        "{} x values for {} observations",
                        x.len(),
                        self.observed.len()
                    )));
                }
                if x.iter().any(|v| !v.is_finite()) || x.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(self.invalid("x values must be finite and strictly increasing"));
                }
            }
            (DatasetKind::UniVariate, None) => {
                return Err(self.invalid("uni-variate data needs x values"))
            }
        }
        Ok(())
    }
}

/// Ordered datasets of one calibration problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DatasetCollection {
    datasets: Vec<Dataset>,
}

impl<'de> Deserialize<'de> for DatasetCollection {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let datasets = Vec::<Dataset>::deserialize(deserializer)?;
        DatasetCollection::new(datasets).map_err(serde::de::Error::custom)
    }
}

impl DatasetCollection {
    /// Fails on duplicate ids or when no dataset carries positive weight.
    pub fn new(datasets: Vec<Dataset>) -> Result<Self> {
        let mut ids = std::collections::BTreeSet::new();
        for d in &datasets {
            if !ids.insert(d.id.as_str()) {
                return Err(Error::InvalidData {
                    dataset: d.id.clone(),
                    reason: "duplicate dataset id".into(),
                });
            }
        }
        let out = Self { datasets };
        if out.active_count() == 0 {
            return Err(Error::IllPosed(
                "no dataset has positive total weight".into(),
            ));
        }
        Ok(out)
    }

    pub fn datasets(&self) -> &[Dataset] {
        &self.datasets
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    /// `n'`: datasets whose total weight is positive.
    pub fn active_count(&self) -> usize {
        self.datasets
            .iter()
            .filter(|d| d.total_weight() > 0.0)
            .count()
    }

    pub fn get(&self, id: &str) -> Option<&Dataset> {
        self.datasets.iter().find(|d| d.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Dataset> {
        self.datasets.iter()
    }
}
