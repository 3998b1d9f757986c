//! Side-by-side comparison of plain Nelder–Mead and SHADE + refinement
//! under equal evaluation budgets.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Problem;
use crate::orchestrator::{calibrate, CalibrationOptions, Method, SolutionSet};

/// Smallest budget the comparison accepts.
pub const MIN_BUDGET: u64 = 1_000;

/// Outcome of both methods for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub seed: u64,
    pub nm_best: f64,
    pub nm_mre: Option<f64>,
    pub nm_smse: Option<f64>,
    pub nm_evaluations: u64,
    pub shade_best: f64,
    /// Mean loss over the whole returned SHADE set.
    pub shade_set_mean: f64,
    pub shade_mre: Option<f64>,
    pub shade_smse: Option<f64>,
    pub shade_set_size: usize,
    pub shade_evaluations: u64,
    /// `(nm_best - shade_best) / nm_best`; 0 when both are equal, `None`
    /// when undefined (NM reached exactly zero and SHADE did not).
    pub improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub budget: u64,
    pub engine_fraction: f64,
    pub num_results: usize,
    pub rows: Vec<CompareRow>,
}

pub fn improvement(nm_best: f64, shade_best: f64) -> Option<f64> {
    if nm_best == shade_best {
        Some(0.0)
    } else if nm_best == 0.0 {
        None
    } else {
        Some((nm_best - shade_best) / nm_best)
    }
}

fn run_pair(problem: &Problem, budget: u64, num_results: usize, seed: u64) -> Result<CompareRow> {
    let nm_opts = CalibrationOptions {
        method: Method::Nm,
        max_fun_evals: Some(budget),
        num_results: 1,
        seed,
        ..Default::default()
    };
    let shade_opts = CalibrationOptions {
        method: Method::Shade,
        max_fun_evals: Some(budget),
        num_results,
        seed,
        ..Default::default()
    };
    let nm = calibrate(problem, &nm_opts)?;
    let shade = calibrate(problem, &shade_opts)?;
    let best = |s: &SolutionSet| s.fun_values[0];
    Ok(CompareRow {
        seed,
        nm_best: best(&nm),
        nm_mre: nm.results.best.mre,
        nm_smse: nm.results.best.smse,
        nm_evaluations: nm.results.evaluations,
        shade_best: best(&shade),
        shade_set_mean: shade.fun_values.iter().sum::<f64>() / shade.set_size as f64,
        shade_mre: shade.results.best.mre,
        shade_smse: shade.results.best.smse,
        shade_set_size: shade.set_size,
        shade_evaluations: shade.results.evaluations,
        improvement: improvement(best(&nm), best(&shade)),
    })
}

/// Runs NM (continuation restarts over the full budget) and SHADE with the
/// default engine/refinement split for every seed. Seeds may run in
/// parallel; each row depends only on its seed.
pub fn compare(
    problem: &Problem,
    budget: u64,
    seeds: &[u64],
    num_results: usize,
    parallel: bool,
) -> Result<Comparison> {
    if budget < MIN_BUDGET {
        return Err(Error::InvalidOptions(format!(
            "comparison budget must be at least {MIN_BUDGET}, got {budget}"
        )));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidOptions(
            "comparison needs at least one seed".into(),
        ));
    }
    let rows: Result<Vec<CompareRow>> = if parallel {
        seeds
            .par_iter()
            .map(|&s| run_pair(problem, budget, num_results, s))
            .collect()
    } else {
        seeds
            .iter()
            .map(|&s| run_pair(problem, budget, num_results, s))
            .collect()
    };
    Ok(Comparison {
        budget,
        engine_fraction: CalibrationOptions::default().engine_fraction,
        num_results,
        rows: rows?,
    })
}

impl Comparison {
    /// Seeds where SHADE's best loss is at most NM's.
    pub fn shade_not_worse(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.shade_best <= r.nm_best)
            .count()
    }

    pub fn shade_strictly_better(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.shade_best < r.nm_best)
            .count()
    }

    /// Largest relative amount by which SHADE trails NM (0 if it never does).
    pub fn worst_shortfall(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.shade_best > r.nm_best)
            .map(|r| {
                if r.nm_best == 0.0 {
                    f64::INFINITY
                } else {
                    (r.shade_best - r.nm_best) / r.nm_best
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn to_table(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>6}  {:>12}  {:>10}  {:>10}  {:>12}  {:>12}  {:>10}  {:>10}  {:>5}  {:>11}",
            "seed",
            "NM best",
            "NM MRE",
            "NM SMSE",
            "SHADE best",
            "SHADE avg",
            "SHADE MRE",
            "SHADE SMSE",
            "n",
            "improvement"
        );
        for r in &self.rows {
            let imp = r
                .improvement
                .map_or_else(|| "n/a".to_string(), |x| format!("{:.2}%", 100.0 * x));
            let _ = writeln!(
                out,
                "{:>6}  {:>12.6e}  {:>10}  {:>10}  {:>12.6e}  {:>12.6e}  {:>10}  {:>10}  {:>5}  {:>11}",
                r.seed,
                r.nm_best,
                f(r.nm_mre),
                f(r.nm_smse),
                r.shade_best,
                r.shade_set_mean,
                f(r.shade_mre),
                f(r.shade_smse),
                r.shade_set_size,
                imp
            );
        }
        let _ = writeln!(
            out,
            "SHADE <= NM in {}/{} seeds ({} strictly better); worst shortfall {:.3e}",
            self.shade_not_worse(),
            self.rows.len(),
            self.shade_strictly_better(),
            self.worst_shortfall()
        );
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io("buffering csv", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::builtin;

    #[test]
    fn improvement_convention() {
        assert_eq!(improvement(0.5, 0.5), Some(0.0));
        assert_eq!(improvement(0.0, 0.0), Some(0.0));
        assert_eq!(improvement(0.0, 1.0), None);
        assert!((improvement(0.4, 0.3).unwrap() - 0.25).abs() < 1e-15);
        assert!(improvement(0.3, 0.4).unwrap() < 0.0);
    }

    #[test]
    fn rejects_small_budget() {
        let p = builtin::problem("toy_growth").unwrap();
        assert!(compare(&p, 999, &[0], 10, false).is_err());
        assert!(compare(&p, 1_000, &[], 10, false).is_err());
    }

    #[test]
    fn rows_do_not_depend_on_parallelism() {
        let p = builtin::problem("toy_growth").unwrap();
        let a = compare(&p, 2_000, &[1, 2, 3], 20, false).unwrap();
        let b = compare(&p, 2_000, &[1, 2, 3], 20, true).unwrap();
        assert_eq!(a, b);
        assert!(a.rows.iter().all(|r| r.shade_set_size == 20
            && r.nm_evaluations <= 2_000
            && r.shade_evaluations <= 2_000));
        assert_eq!(a.to_csv().unwrap().lines().count(), 4);
        assert_eq!(a.to_table().lines().count(), 5);
    }
}
