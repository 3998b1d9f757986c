use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Pair;
use crate::error::Result;
use crate::objective::ParameterSpace;
use crate::orchestrator::SolutionSet;

/// Bandwidth used on an axis whose normalized sample spread is zero.
const DEGENERATE_SIGMA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScatterMode {
    Plain,
    /// Each point carries its solution's loss.
    Weighted,
    /// Each point carries a kernel density estimate of the set at that point.
    Density,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterSeries {
    pub params: (String, String),
    /// Parameter bounds `((lower_a, upper_a), (lower_b, upper_b))`.
    pub bounds: ((f64, f64), (f64, f64)),
    pub mode: ScatterMode,
    pub points: Vec<(f64, f64)>,
    /// Loss or density per point; `None` in plain mode.
    pub values: Option<Vec<f64>>,
}

/// Silverman's rule for a 2-D product kernel: `h = sigma * n^(-1/6)`.
///
/// `sigma` is the sample standard deviation; a zero spread falls back to a
/// small fixed width so the estimate stays finite.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let sigma = if values.len() < 2 {
        0.0
    } else {
        let mean = values.iter().sum::<f64>() / n;
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let sigma = if sigma > 0.0 && sigma.is_finite() {
        sigma
    } else {
        DEGENERATE_SIGMA
    };
    sigma * n.powf(-1.0 / 6.0)
}

/// Product-Gaussian kernel density estimate in two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    points: Vec<(f64, f64)>,
    h: (f64, f64),
}

impl Kde {
    /// Estimate with per-axis Silverman bandwidths.
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let h = (silverman_bandwidth(&xs), silverman_bandwidth(&ys));
        Self { points, h }
    }

    pub fn bandwidth(&self) -> (f64, f64) {
        self.h
    }

    pub fn at(&self, q: (f64, f64)) -> f64 {
        let (hx, hy) = self.h;
        let norm = 1.0 / (2.0 * PI * hx * hy * self.points.len() as f64);
        let s: f64 = self
            .points
            .iter()
            .map(|p| {
                let zx = (q.0 - p.0) / hx;
                let zy = (q.1 - p.1) / hy;
                (-0.5 * (zx * zx + zy * zy)).exp()
            })
            .sum();
        s * norm
    }
}

/// Scatter series of parameters `a` (x) and `b` (y). Density values are
/// computed in bounds-normalized coordinates.
pub fn scatter(
    set: &SolutionSet,
    space: &ParameterSpace,
    a: &str,
    b: &str,
    mode: ScatterMode,
) -> Result<ScatterSeries> {
    let pair = Pair::resolve(space, a, b)?;
    let points = pair.points(set)?;
    let values = match mode {
        ScatterMode::Plain => None,
        ScatterMode::Weighted => Some(set.fun_values.clone()),
        ScatterMode::Density => {
            let kde = Kde::new(points.iter().map(|&p| pair.normalize(p)).collect());
            Some(points.iter().map(|&p| kde.at(pair.normalize(p))).collect())
        }
    };
    let bounds = ((pair.lower.0, pair.upper.0), (pair.lower.1, pair.upper.1));
    Ok(ScatterSeries {
        params: pair.names,
        bounds,
        mode,
        points,
        values,
    })
}
