//! Chart data for solution sets and its static SVG / CSV rendering.
//!
//! Computation and rendering are separate: [`density_heatmap`], [`scatter`]
//! and [`prediction_plot_data`] are pure functions of a solution set, while
//! [`render`] turns the result into bytes. Both halves are deterministic.

mod grid;
mod prediction;
mod render;
mod scatter;

pub use grid::{density_heatmap, CellValue, Grid2D, DEFAULT_BINS};
pub use prediction::{
    prediction_plot_data, Curve, CurveRole, PlotSelection, PredictionPlotData, SeriesPlot,
    SetMetrics, ZeroVariatePlot,
};
pub use render::{file_name, render, render_csv, render_svg, Chart, Format};
pub use scatter::{scatter, silverman_bandwidth, Kde, ScatterMode, ScatterSeries};

use crate::error::{Error, Result};
use crate::objective::ParameterSpace;
use crate::orchestrator::SolutionSet;

/// Two free parameters resolved to positions in the free vector.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Pair {
    pub names: (String, String),
    pub index: (usize, usize),
    pub lower: (f64, f64),
    pub upper: (f64, f64),
}

impl Pair {
    pub(crate) fn resolve(space: &ParameterSpace, a: &str, b: &str) -> Result<Self> {
        let ia = space.free_position(a)?;
        let ib = space.free_position(b)?;
        if ia == ib {
            return Err(Error::InvalidOptions(format!(
                "chart needs two different parameters, got `{a}` twice"
            )));
        }
        let bounds = |name: &str| {
            let p = space
                .parameters()
                .iter()
                .find(|p| p.name == name)
                .expect("resolved above");
            (p.lower, p.upper)
        };
        let (la, ua) = bounds(a);
        let (lb, ub) = bounds(b);
        Ok(Self {
            names: (a.into(), b.into()),
            index: (ia, ib),
            lower: (la, lb),
            upper: (ua, ub),
        })
    }

    pub(crate) fn points(&self, set: &SolutionSet) -> Result<Vec<(f64, f64)>> {
        let need = self.index.0.max(self.index.1);
        set.solutions_set
            .iter()
            .enumerate()
            .map(|(i, v)| match (v.get(self.index.0), v.get(self.index.1)) {
                (Some(&a), Some(&b)) => Ok((a, b)),
                _ => Err(Error::schema(
                    format!("solutions_set[{i}]"),
                    format!("has {} values, needs at least {}", v.len(), need + 1),
                )),
            })
            .collect()
    }

    pub(crate) fn normalize(&self, p: (f64, f64)) -> (f64, f64) {
        (
            (p.0 - self.lower.0) / (self.upper.0 - self.lower.0),
            (p.1 - self.lower.1) / (self.upper.1 - self.lower.1),
        )
    }
}
