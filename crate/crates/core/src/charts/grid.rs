use serde::{Deserialize, Serialize};

use super::Pair;
use crate::error::{Error, Result};
use crate::objective::ParameterSpace;
use crate::orchestrator::SolutionSet;

pub const DEFAULT_BINS: (usize, usize) = (25, 25);

/// Which per-cell value a heatmap displays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellValue {
    Count,
    MinLoss,
}

/// Binned view of one parameter pair over raw parameter bounds.
///
/// Bins are lower-edge inclusive; the top edge of the last bin is inclusive
/// too, so every in-bounds solution lands in exactly one cell. Cells are
/// row-major: `counts[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub params: (String, String),
    pub nx: usize,
    pub ny: usize,
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    pub value: CellValue,
    pub counts: Vec<usize>,
    /// Lowest loss among the solutions in each cell; `None` for empty cells.
    pub min_loss: Vec<Option<f64>>,
}

impl Grid2D {
    pub fn count(&self, ix: usize, iy: usize) -> usize {
        self.counts[iy * self.nx + ix]
    }

    pub fn cell_min_loss(&self, ix: usize, iy: usize) -> Option<f64> {
        self.min_loss[iy * self.nx + ix]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

fn edges(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            if k == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / n as f64
            }
        })
        .collect()
}

fn bin(v: f64, lo: f64, hi: f64, n: usize) -> usize {
    let t = ((v - lo) / (hi - lo) * n as f64).floor();
    if t.is_nan() || t < 0.0 {
        0
    } else {
        (t as usize).min(n - 1)
    }
}

/// Heatmap of the set over the bounds of parameters `a` (x) and `b` (y).
pub fn density_heatmap(
    set: &SolutionSet,
    space: &ParameterSpace,
    a: &str,
    b: &str,
    bins: (usize, usize),
    value: CellValue,
) -> Result<Grid2D> {
    let (nx, ny) = bins;
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidOptions(format!(
            "heatmap needs at least 2 bins per axis, got {nx}x{ny}"
        )));
    }
    let pair = Pair::resolve(space, a, b)?;
    let points = pair.points(set)?;
    let mut counts = vec![0; nx * ny];
    let mut min_loss: Vec<Option<f64>> = vec![None; nx * ny];
    for (i, &(x, y)) in points.iter().enumerate() {
        let ix = bin(x, pair.lower.0, pair.upper.0, nx);
        let iy = bin(y, pair.lower.1, pair.upper.1, ny);
        let c = iy * nx + ix;
        counts[c] += 1;
        if let Some(&f) = set.fun_values.get(i) {
            min_loss[c] = Some(min_loss[c].map_or(f, |m: f64| m.min(f)));
        }
    }
    Ok(Grid2D {
        params: pair.names,
        nx,
        ny,
        x_edges: edges(pair.lower.0, pair.upper.0, nx),
        y_edges: edges(pair.lower.1, pair.upper.1, ny),
        value,
        counts,
        min_loss,
    })
}
