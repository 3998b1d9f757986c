use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::loss::{mre, smse};
use crate::objective::{DatasetKind, Problem};
use crate::orchestrator::SolutionSet;

/// Which predictions to plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotSelection {
    /// Predictions of the problem's initial (uncalibrated) parameter values.
    Basic,
    /// Predictions of the lowest-loss solution.
    Best,
    /// Every solution plus the best, with set-average metrics.
    Set,
    /// Basic, best and set together.
    Complete,
}

impl std::str::FromStr for PlotSelection {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(Self::Basic),
            "best" => Ok(Self::Best),
            "set" => Ok(Self::Set),
            "complete" => Ok(Self::Complete),
            _ => Err(crate::Error::InvalidOptions(format!(
                "unknown plot selection `{s}` (basic, best, set, complete)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveRole {
    Initial,
    Best,
    Member,
}

/// One predicted series, aligned with its dataset's points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub role: CurveRole,
    /// Index into the solution set; `None` for the initial parameters.
    pub solution: Option<usize>,
    pub values: Vec<f64>,
}

/// A uni-variate dataset: observations and the selected predicted curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPlot {
    pub dataset: String,
    pub x: Vec<f64>,
    pub observed: Vec<f64>,
    pub curves: Vec<Curve>,
}

/// A zero-variate dataset: one observed value and its predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroVariatePlot {
    pub dataset: String,
    pub observed: f64,
    pub predicted: Vec<Curve>,
}

/// Arithmetic means of the per-solution metrics over the solutions whose
/// metric is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetMetrics {
    pub mean_mre: Option<f64>,
    pub mean_smse: Option<f64>,
    /// Solutions that contributed a prediction.
    pub solutions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionPlotData {
    pub selection: PlotSelection,
    pub series: Vec<SeriesPlot>,
    pub zero_variate: Vec<ZeroVariatePlot>,
    /// Present for `set` and `complete`.
    pub set_metrics: Option<SetMetrics>,
    /// Solutions (or `None` for the initial values) whose prediction failed.
    pub failures: Vec<(Option<usize>, String)>,
}

/// Observed data with predictions for the selected solutions. A failing
/// prediction is recorded in `failures` and the rest of the plot proceeds.
pub fn prediction_plot_data(
    set: &SolutionSet,
    selection: PlotSelection,
    problem: &Problem,
) -> Result<PredictionPlotData> {
    let data = problem.data();
    let mut wanted: Vec<(CurveRole, Option<usize>, Vec<f64>)> = Vec::new();
    if matches!(selection, PlotSelection::Basic | PlotSelection::Complete) {
        wanted.push((CurveRole::Initial, None, problem.space().initial_free()));
    }
    if matches!(selection, PlotSelection::Set | PlotSelection::Complete) {
        wanted.extend(
            set.solutions_set
                .iter()
                .enumerate()
                .map(|(i, v)| (CurveRole::Member, Some(i), v.clone())),
        );
    }
    if selection != PlotSelection::Basic {
        if let Some(v) = set.solutions_set.first() {
            wanted.push((CurveRole::Best, Some(0), v.clone()));
        }
    }

    let mut series: Vec<SeriesPlot> = Vec::new();
    let mut zero_variate: Vec<ZeroVariatePlot> = Vec::new();
    for d in data.iter() {
        match d.kind {
            DatasetKind::UniVariate => series.push(SeriesPlot {
                dataset: d.id.clone(),
                x: d.x.clone().unwrap_or_default(),
                observed: d.observed.clone(),
                curves: Vec::new(),
            }),
            DatasetKind::ZeroVariate => zero_variate.push(ZeroVariatePlot {
                dataset: d.id.clone(),
                observed: d.observed[0],
                predicted: Vec::new(),
            }),
        }
    }

    let mut failures = Vec::new();
    let (mut mres, mut smses, mut contributed) = (Vec::new(), Vec::new(), 0);
    for (role, solution, v) in wanted {
        let preds = match problem.predict(&v) {
            Ok(p) => p,
            Err(e) => {
                // the best solution may also appear as a member
                if !failures.iter().any(|(s, _)| *s == solution) {
                    failures.push((solution, e.to_string()));
                }
                continue;
            }
        };
        if role == CurveRole::Member {
            contributed += 1;
            mres.extend(mre(data, &preds).ok());
            smses.extend(smse(data, &preds).ok());
        }
        let (mut si, mut zi) = (0, 0);
        for (d, p) in data.iter().zip(preds) {
            let curve = Curve {
                role,
                solution,
                values: p,
            };
            match d.kind {
                DatasetKind::UniVariate => {
                    series[si].curves.push(curve);
                    si += 1;
                }
                DatasetKind::ZeroVariate => {
                    zero_variate[zi].predicted.push(curve);
                    zi += 1;
                }
            }
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let set_metrics =
        matches!(selection, PlotSelection::Set | PlotSelection::Complete).then(|| SetMetrics {
            mean_mre: mean(&mres),
            mean_smse: mean(&smses),
            solutions: contributed,
        });
    Ok(PredictionPlotData {
        selection,
        series,
        zero_variate,
        set_metrics,
        failures,
    })
}
