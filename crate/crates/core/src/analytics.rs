//! Summary statistics over a solution set.
//!
//! Every statistic is computed on a sorted copy of its inputs, so results are
//! bit-identical under any reordering of the solutions. Statistics that are
//! undefined for the data at hand are `None` (JSON `null`), never NaN.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::ParameterSpace;
use crate::orchestrator::{Metrics, SolutionSet};

/// Statistics of the loss values of a set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub cardinality: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub std_dev: f64,
    /// Mean absolute difference over all unordered pairs; 0 for a single value.
    pub mean_pairwise_distance: f64,
}

impl LossStats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySet);
        }
        let v = sorted(values);
        let n = v.len();
        let (mean, std_dev) = mean_std(&v);
        // sum_{a<b} |v_a - v_b| over sorted values = sum_k v_k (2k - n + 1)
        let pairwise = if n < 2 {
            0.0
        } else {
            let s: f64 = v
                .iter()
                .enumerate()
                .map(|(k, x)| x * (2.0 * k as f64 - n as f64 + 1.0))
                .sum();
            (2.0 * s / (n as f64 * (n - 1) as f64)).max(0.0)
        };
        Ok(Self {
            cardinality: n,
            mean,
            min: v[0],
            max: v[n - 1],
            std_dev,
            mean_pairwise_distance: pairwise,
        })
    }
}

/// Statistics of one parameter across a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStats {
    pub name: String,
    pub mean: f64,
    pub std_dev: f64,
    pub spread: f64,
    pub min: f64,
    pub max: f64,
    /// Sample skewness G1; `None` for n < 4 or zero variance.
    pub skewness: Option<f64>,
    /// Sample excess kurtosis G2; `None` for n < 4 or zero variance.
    pub kurtosis: Option<f64>,
    /// Sarle's sample bimodality coefficient; `None` when G1/G2 are.
    pub bimodality_coefficient: Option<f64>,
    /// Mean of `(x - lower) / (upper - lower)`.
    pub mean_distance_to_lower: f64,
    /// Mean of `(upper - x) / (upper - lower)`.
    pub mean_distance_to_upper: f64,
}

impl ParamStats {
    pub fn of(name: impl Into<String>, values: &[f64], lower: f64, upper: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySet);
        }
        let v = sorted(values);
        let n = v.len();
        let (mean, std_dev) = mean_std(&v);
        let range = upper - lower;
        let to_lower = v.iter().map(|x| (x - lower) / range).sum::<f64>() / n as f64;
        let to_upper = v.iter().map(|x| (upper - x) / range).sum::<f64>() / n as f64;
        let (skewness, kurtosis, bimodality_coefficient) = match shape(&v, mean) {
            Some((g1, g2)) => {
                let nf = n as f64;
                let bc =
                    (g1 * g1 + 1.0) / (g2 + 3.0 * (nf - 1.0).powi(2) / ((nf - 2.0) * (nf - 3.0)));
                (Some(g1), Some(g2), Some(bc))
            }
            None => (None, None, None),
        };
        Ok(Self {
            name: name.into(),
            mean,
            std_dev,
            spread: v[n - 1] - v[0],
            min: v[0],
            max: v[n - 1],
            skewness,
            kurtosis,
            bimodality_coefficient,
            mean_distance_to_lower: to_lower,
            mean_distance_to_upper: to_upper,
        })
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Mean (clamped into [min, max] against rounding) and sample std of sorted values.
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = (v.iter().sum::<f64>() / n).clamp(v[0], v[v.len() - 1]);
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Sample-corrected skewness G1 and excess kurtosis G2.
fn shape(v: &[f64], mean: f64) -> Option<(f64, f64)> {
    let n = v.len();
    if n < 4 || v[0] == v[n - 1] {
        return None;
    }
    let nf = n as f64;
    let m = |p: i32| v.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / nf;
    let (m2, m3, m4) = (m(2), m(3), m(4));
    if m2 <= 0.0 {
        return None;
    }
    let g1 = m3 / m2.powf(1.5);
    let g2 = m4 / (m2 * m2) - 3.0;
    let big_g1 = g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0);
    let big_g2 = (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)) * ((nf + 1.0) * g2 + 6.0);
    (big_g1.is_finite() && big_g2.is_finite()).then_some((big_g1, big_g2))
}

pub fn loss_stats(set: &SolutionSet) -> Result<LossStats> {
    LossStats::of(&set.fun_values)
}

/// One [`ParamStats`] per free parameter, in vector order.
pub fn param_stats(set: &SolutionSet, space: &ParameterSpace) -> Result<Vec<ParamStats>> {
    if set.solutions_set.is_empty() {
        return Err(Error::EmptySet);
    }
    let free: Vec<_> = space.parameters().iter().filter(|p| p.free).collect();
    for (i, v) in set.solutions_set.iter().enumerate() {
        if v.len() != free.len() {
            return Err(Error::schema(
                format!("solutions_set[{i}]"),
                format!("has {} values, expected {}", v.len(), free.len()),
            ));
        }
    }
    free.iter()
        .enumerate()
        .map(|(k, p)| {
            let column: Vec<f64> = set.solutions_set.iter().map(|v| v[k]).collect();
            ParamStats::of(&p.name, &column, p.lower, p.upper)
        })
        .collect()
}

/// Machine-readable statistics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub loss: LossStats,
    pub best: Metrics,
    pub parameters: Vec<ParamStats>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_path_to_error::deserialize(&mut serde_json::Deserializer::from_str(text))
            .map_err(|e| Error::schema(e.path().to_string(), e.inner().to_string()))
    }

    /// Fixed-layout text rendering, stable across runs and platforms.
    pub fn to_text(&self) -> String {
        let l = &self.loss;
        let mut out = String::new();
        let _ = writeln!(out, "solutions        {}", l.cardinality);
        let _ = writeln!(out, "loss mean        {}", num(l.mean));
        let _ = writeln!(out, "loss min         {}", num(l.min));
        let _ = writeln!(out, "loss max         {}", num(l.max));
        let _ = writeln!(out, "loss std         {}", num(l.std_dev));
        let _ = writeln!(out, "loss pairwise    {}", num(l.mean_pairwise_distance));
        let _ = writeln!(out, "best MRE         {}", opt(self.best.mre));
        let _ = writeln!(out, "best SMSE        {}", opt(self.best.smse));
        for p in &self.parameters {
            let _ = writeln!(out);
            let _ = writeln!(out, "[{}]", p.name);
            let rows = [
                ("mean", num(p.mean)),
                ("std", num(p.std_dev)),
                ("spread", num(p.spread)),
                ("min", num(p.min)),
                ("max", num(p.max)),
                ("skewness", opt(p.skewness)),
                ("kurtosis", opt(p.kurtosis)),
                ("bimodality", opt(p.bimodality_coefficient)),
                ("to lower", num(p.mean_distance_to_lower)),
                ("to upper", num(p.mean_distance_to_upper)),
            ];
            for (k, v) in rows {
                let _ = writeln!(out, "  {k:<14} {v}");
            }
        }
        out
    }
}

fn num(x: f64) -> String {
    format!("{x:.6e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), num)
}

/// Loss and parameter statistics plus the best solution's metrics.
pub fn report(set: &SolutionSet, space: &ParameterSpace) -> Result<Report> {
    Ok(Report {
        loss: loss_stats(set)?,
        best: set.results.best,
        parameters: param_stats(set, space)?,
    })
}
