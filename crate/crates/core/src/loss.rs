//! Goodness-of-fit metrics and budgeted objective evaluation.
//!
//! Notation: dataset `i` has observations `d_ij`, predictions `p_ij`, weights
//! `w_ij` with total `w_i`. Datasets with `w_i = 0` are ignored everywhere and
//! `n'` counts the remaining ones.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use crate::error::{Error, Result};
use crate::objective::{DatasetCollection, ParameterSpace, Predictions, Problem};

/// Loss assigned to filter-rejected or failed candidates.
pub const INFEASIBLE: f64 = f64::INFINITY;

fn check_shapes(data: &DatasetCollection, preds: &Predictions) -> Result<()> {
    if preds.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: preds.len(),
        });
    }
    for (p, d) in preds.iter().zip(data.iter()) {
        if p.len() != d.len() {
            return Err(Error::DimensionMismatch {
                expected: d.len(),
                got: p.len(),
            });
        }
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean relative error: additive, unbounded above.
pub fn mre(data: &DatasetCollection, preds: &Predictions) -> Result<f64> {
    check_shapes(data, preds)?;
    let mut total = 0.0;
    for (ds, p) in data.iter().zip(preds) {
        let w_i = ds.total_weight();
        if w_i <= 0.0 {
            continue;
        }
        let d_mean = ds.mean_observed().abs();
        if d_mean == 0.0 {
            return Err(Error::ZeroDenominator {
                dataset: ds.id.clone(),
                reason: "mean observation is zero".into(),
            });
        }
        let sum: f64 = ds
            .weights
            .iter()
            .zip(&ds.observed)
            .zip(p)
            .map(|((w, d), p)| w * (p - d).abs())
            .sum();
        total += sum / (w_i * d_mean);
    }
    Ok(total / data.active_count() as f64)
}

fn symmetric_terms(data: &DatasetCollection, preds: &Predictions) -> Result<Vec<(f64, f64)>> {
    check_shapes(data, preds)?;
    let mut out = Vec::with_capacity(data.len());
    for (ds, p) in data.iter().zip(preds) {
        let w_i = ds.total_weight();
        if w_i <= 0.0 {
            continue;
        }
        let (p_mean, d_mean) = (mean(p), ds.mean_observed());
        let denom = p_mean * p_mean + d_mean * d_mean;
        if denom == 0.0 {
            return Err(Error::ZeroDenominator {
                dataset: ds.id.clone(),
                reason: "mean prediction and mean observation are both zero".into(),
            });
        }
        let sum: f64 = ds
            .weights
            .iter()
            .zip(&ds.observed)
            .zip(p)
            .map(|((w, d), p)| w * (p - d).powi(2))
            .sum();
        out.push((sum / denom, w_i));
    }
    Ok(out)
}

/// Symmetric mean squared error: multiplicative, bounded in `[0, 1]`.
pub fn smse(data: &DatasetCollection, preds: &Predictions) -> Result<f64> {
    let terms = symmetric_terms(data, preds)?;
    Ok(terms.iter().map(|(s, w_i)| s / w_i).sum::<f64>() / data.active_count() as f64)
}

/// Loss minimized by the engines: `sum_i sum_j w_ij (p_ij - d_ij)^2 / (d_i^2 + p_i^2)`.
///
/// This is the symmetric form without the `1/n'` and `1/w_i` normalizations;
/// with a single dataset and default weights it equals [`smse`].
pub fn primary_loss(data: &DatasetCollection, preds: &Predictions) -> Result<f64> {
    Ok(symmetric_terms(data, preds)?.iter().map(|(s, _)| s).sum())
}

/// Total order on losses: NaN is treated like the infeasible sentinel.
pub fn cmp_loss(a: f64, b: f64) -> Ordering {
    let key = |v: f64| if v.is_nan() { INFEASIBLE } else { v };
    key(a).partial_cmp(&key(b)).expect("NaN mapped away")
}

/// Orders `(loss, vector)` pairs by loss, breaking ties lexicographically.
pub fn cmp_candidates(a: (f64, &[f64]), b: (f64, &[f64])) -> Ordering {
    cmp_loss(a.0, b.0).then_with(|| {
        a.1.iter()
            .zip(b.1)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Shared count of objective evaluations with a hard limit.
///
/// Reservations are all-or-nothing compare-and-swap updates, so concurrent
/// evaluators can never push the count past the limit.
#[derive(Debug)]
pub struct EvalCounter {
    count: AtomicU64,
    limit: u64,
}

impl EvalCounter {
    pub fn new(limit: u64) -> Self {
        Self {
            count: AtomicU64::new(0),
            limit,
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(AtomicOrdering::SeqCst)
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// Evaluations left under `min(cap, limit)`.
    pub fn remaining(&self, cap: u64) -> u64 {
        cap.min(self.limit).saturating_sub(self.count())
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining(u64::MAX) == 0
    }

    /// Reserves up to `n` evaluations under `min(cap, limit)`; returns how many
    /// were granted.
    pub fn reserve_upto(&self, n: u64, cap: u64) -> u64 {
        let ceiling = cap.min(self.limit);
        let mut granted = 0;
        let _ = self
            .count
            .fetch_update(AtomicOrdering::SeqCst, AtomicOrdering::SeqCst, |c| {
                granted = ceiling.saturating_sub(c).min(n);
                (granted > 0).then_some(c + granted)
            });
        granted
    }

    /// Reserves one evaluation or reports exhaustion.
    pub fn acquire(&self, cap: u64) -> Result<()> {
        if self.reserve_upto(1, cap) == 1 {
            Ok(())
        } else {
            Err(Error::BudgetExhausted {
                limit: cap.min(self.limit),
            })
        }
    }
}

/// What the engines minimize.
pub trait Objective: Sync {
    fn space(&self) -> &ParameterSpace;

    /// Feasibility filter; rejected vectors are never evaluated.
    fn accepts(&self, free_values: &[f64]) -> bool;

    /// Loss of an accepted vector, [`INFEASIBLE`] when the model fails.
    fn loss(&self, free_values: &[f64]) -> f64;
}

impl Objective for Problem {
    fn space(&self) -> &ParameterSpace {
        Problem::space(self)
    }

    fn accepts(&self, free_values: &[f64]) -> bool {
        Problem::accepts(self, free_values)
    }

    fn loss(&self, free_values: &[f64]) -> f64 {
        self.predict(free_values)
            .and_then(|p| primary_loss(self.data(), &p))
            .unwrap_or(INFEASIBLE)
    }
}

/// Closure-backed objective over a box, mainly for benchmarks and tests.
pub struct FnObjective<F> {
    space: ParameterSpace,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnObjective<F> {
    pub fn new(space: ParameterSpace, f: F) -> Self {
        Self { space, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn accepts(&self, _free_values: &[f64]) -> bool {
        true
    }

    fn loss(&self, free_values: &[f64]) -> f64 {
        let v = (self.f)(free_values);
        if v.is_nan() {
            INFEASIBLE
        } else {
            v
        }
    }
}

/// Budgeted evaluation of one vector under `min(cap, limit)`.
///
/// Filter rejections return [`INFEASIBLE`] without touching the counter.
pub fn evaluate_capped<O: Objective + ?Sized>(
    counter: &EvalCounter,
    objective: &O,
    v: &[f64],
    cap: u64,
) -> Result<f64> {
    if counter.remaining(cap) == 0 {
        return Err(Error::BudgetExhausted {
            limit: cap.min(counter.limit()),
        });
    }
    if !objective.accepts(v) {
        return Ok(INFEASIBLE);
    }
    counter.acquire(cap)?;
    Ok(objective.loss(v))
}

/// Result of [`evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub predictions: Option<Predictions>,
}

/// Predicts and scores one vector of a [`Problem`], consuming one evaluation
/// unless the filter rejects it.
pub fn evaluate(counter: &EvalCounter, problem: &Problem, v: &[f64]) -> Result<Evaluation> {
    if counter.is_exhausted() {
        return Err(Error::BudgetExhausted {
            limit: counter.limit(),
        });
    }
    if !problem.accepts(v) {
        return Ok(Evaluation {
            loss: INFEASIBLE,
            predictions: None,
        });
    }
    counter.acquire(u64::MAX)?;
    match problem.predict(v) {
        Ok(p) => {
            let loss = primary_loss(problem.data(), &p).unwrap_or(INFEASIBLE);
            Ok(Evaluation {
                loss,
                predictions: Some(p),
            })
        }
        Err(_) => Ok(Evaluation {
            loss: INFEASIBLE,
            predictions: None,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{builtin, Dataset};

    fn single() -> DatasetCollection {
        DatasetCollection::new(vec![Dataset::uni_variate(
            "d",
            vec![0.0, 1.0],
            vec![1.0, 3.0],
        )
        .unwrap()])
        .unwrap()
    }

    #[test]
    fn hand_computed_single_dataset() {
        let data = single();
        let p = vec![vec![2.0, 3.0]];
        assert_eq!(mre(&data, &p).unwrap(), 0.25);
        assert!((smse(&data, &p).unwrap() - 0.5 / 10.25).abs() < 1e-15);
        assert!((smse(&data, &p).unwrap() - 0.048780).abs() < 1e-6);
        assert_eq!(primary_loss(&data, &p).unwrap(), smse(&data, &p).unwrap());
    }

    #[test]
    fn exact_match_is_zero() {
        let data = single();
        let p = vec![vec![1.0, 3.0]];
        assert_eq!(mre(&data, &p).unwrap(), 0.0);
        assert_eq!(smse(&data, &p).unwrap(), 0.0);
        assert_eq!(primary_loss(&data, &p).unwrap(), 0.0);
    }

    #[test]
    fn zero_weight_dataset_is_excluded() {
        let a = Dataset::uni_variate("a", vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
        let b = Dataset::uni_variate("b", vec![0.0, 1.0], vec![5.0, 7.0])
            .unwrap()
            .with_weights(vec![0.0, 0.0])
            .unwrap();
        let both = DatasetCollection::new(vec![a.clone(), b]).unwrap();
        let alone = DatasetCollection::new(vec![a]).unwrap();
        let p2 = vec![vec![2.0, 3.0], vec![100.0, -4.0]];
        let p1 = vec![vec![2.0, 3.0]];
        assert_eq!(mre(&both, &p2).unwrap(), mre(&alone, &p1).unwrap());
        assert_eq!(smse(&both, &p2).unwrap(), smse(&alone, &p1).unwrap());
    }

    #[test]
    fn zero_means_are_hard_errors() {
        let data = DatasetCollection::new(vec![Dataset::uni_variate(
            "flat",
            vec![0.0, 1.0],
            vec![-1.0, 1.0],
        )
        .unwrap()])
        .unwrap();
        match mre(&data, &vec![vec![0.0, 0.0]]) {
            Err(Error::ZeroDenominator { dataset, .. }) => assert_eq!(dataset, "flat"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            smse(&data, &vec![vec![1.0, -1.0]]),
            Err(Error::ZeroDenominator { .. })
        ));
        assert!(smse(&data, &vec![vec![1.0, 1.0]]).is_ok());
    }

    #[test]
    fn smse_can_exceed_one_when_points_anticorrelate() {
        // means coincide while every point is off by 2
        let data = DatasetCollection::new(vec![Dataset::uni_variate(
            "d",
            vec![0.0, 1.0],
            vec![0.0, 2.0],
        )
        .unwrap()])
        .unwrap();
        assert_eq!(smse(&data, &vec![vec![2.0, 0.0]]).unwrap(), 2.0);
    }

    #[test]
    fn infinite_sentinel_orders_last() {
        assert_eq!(cmp_loss(INFEASIBLE, 1e300), Ordering::Greater);
        assert_eq!(cmp_loss(INFEASIBLE, INFEASIBLE), Ordering::Equal);
        assert_eq!(
            cmp_candidates((INFEASIBLE, &[1.0]), (INFEASIBLE, &[2.0])),
            Ordering::Less
        );
    }

    #[test]
    fn evaluate_counts_and_rejects() {
        let problem = builtin::problem("toy_growth").unwrap();
        let counter = EvalCounter::new(2);
        let rejected = evaluate(&counter, &problem, &[50.0, 0.14, 0.0, 3.9]).unwrap();
        assert_eq!(rejected.loss, INFEASIBLE);
        assert!(rejected.predictions.is_none());
        assert_eq!(counter.count(), 0);
        let ok = evaluate(&counter, &problem, &problem.space().initial_free()).unwrap();
        assert!(ok.loss.is_finite() && ok.predictions.is_some());
        assert_eq!(counter.count(), 1);
        evaluate(&counter, &problem, &problem.space().initial_free()).unwrap();
        assert!(matches!(
            evaluate(&counter, &problem, &problem.space().initial_free()),
            Err(Error::BudgetExhausted { limit: 2 })
        ));
        assert_eq!(counter.count(), 2);
    }

    #[test]
    fn concurrent_reservations_never_overshoot() {
        use rayon::prelude::*;
        let counter = EvalCounter::new(1_000);
        let granted: u64 = (0..10_000)
            .into_par_iter()
            .map(|_| counter.reserve_upto(1, u64::MAX))
            .sum();
        assert_eq!(granted, 1_000);
        assert_eq!(counter.count(), 1_000);
        assert_eq!(counter.reserve_upto(5, 2_000), 0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Per dataset: observations, predictions, weights.
        type Columns = Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>;

        fn instance() -> impl Strategy<Value = (Columns, u64)> {
            let ds = (1usize..=5).prop_flat_map(|n| {
                (
                    proptest::collection::vec(0.1f64..100.0, n),
                    proptest::collection::vec(-100.0f64..100.0, n),
                    proptest::collection::vec(0.01f64..1.0, n),
                )
            });
            (proptest::collection::vec(ds, 1..=3), any::<u64>())
        }

        fn build(parts: &[(Vec<f64>, Vec<f64>, Vec<f64>)]) -> (DatasetCollection, Predictions) {
            let sets = parts
                .iter()
                .enumerate()
                .map(|(i, (d, _, w))| {
                    let x = (0..d.len()).map(|k| k as f64).collect();
                    Dataset::uni_variate(format!("d{i}"), x, d.clone())
                        .unwrap()
                        .with_weights(w.clone())
                        .unwrap()
                })
                .collect();
            (
                DatasetCollection::new(sets).unwrap(),
                parts.iter().map(|(_, p, _)| p.clone()).collect(),
            )
        }

        proptest! {
            #[test]
            fn smse_bounded_and_symmetric((parts, _) in instance()) {
                let (data, preds) = build(&parts);
                let s = smse(&data, &preds).unwrap();
                prop_assert!(s >= 0.0);
                prop_assert!(mre(&data, &preds).unwrap() >= 0.0);
                // swap observations and predictions
                let swapped: Vec<_> = parts.iter().map(|(d, p, w)| (p.clone(), d.clone(), w.clone())).collect();
                let sets = swapped.iter().enumerate().map(|(i, (d, _, w))| {
                    let x = (0..d.len()).map(|k| k as f64).collect();
                    Dataset::uni_variate(format!("d{i}"), x, d.clone()).unwrap().with_weights(w.clone()).unwrap()
                }).collect();
                let data2 = DatasetCollection::new(sets).unwrap();
                let preds2: Predictions = swapped.iter().map(|(_, p, _)| p.clone()).collect();
                let s2 = smse(&data2, &preds2).unwrap();
                prop_assert!((s - s2).abs() <= 1e-12 * s.max(1e-300));
            }

            #[test]
            fn smse_at_most_one_for_same_sign_points(d in 0.0f64..1e6, p in 0.0f64..1e6, sign in prop::bool::ANY) {
                prop_assume!(d + p > 0.0);
                let k = if sign { 1.0 } else { -1.0 };
                let data = DatasetCollection::new(vec![Dataset::zero_variate("z", k * d).unwrap()]).unwrap();
                prop_assert!(smse(&data, &vec![vec![k * p]]).unwrap() <= 1.0);
            }

            #[test]
            fn weight_scaling_and_permutation_invariance((parts, seed) in instance(), c in 0.1f64..10.0) {
                let (data, preds) = build(&parts);
                let (m0, s0) = (mre(&data, &preds).unwrap(), smse(&data, &preds).unwrap());
                let rot = (seed as usize) % parts[0].0.len();
                let mut changed = parts.clone();
                let (d, p, w) = &mut changed[0];
                for v in [d, p, w] {
                    v.rotate_left(rot);
                }
                changed[0].2.iter_mut().for_each(|w| *w *= c);
                let (data2, preds2) = build(&changed);
                let (m1, s1) = (mre(&data2, &preds2).unwrap(), smse(&data2, &preds2).unwrap());
                prop_assert!((m0 - m1).abs() <= 1e-12 * m0.max(1e-300));
                prop_assert!((s0 - s1).abs() <= 1e-12 * s0.max(1e-300));
            }
        }
    }
}
