//! Bounded Nelder-Mead refinement with restart-based continuation.
//!
//! Out-of-bounds proposals are projected onto the box. One "step" is one
//! simplex iteration; each iteration costs between 1 and `D + 2` evaluations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{sort_candidates, Candidate, Limits};
use crate::loss::{cmp_candidates, cmp_loss, evaluate_capped, EvalCounter, Objective};
use crate::objective::ParameterSpace;

pub const DEFAULT_MAX_STEPS: usize = 500;
pub const DEFAULT_REL_TOL: f64 = 1e-6;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
const STEP: f64 = 0.05;
const EDGE_STEP: f64 = 0.00025;
const X_TOL: f64 = 1e-12;
const F_TOL: f64 = 1e-15;

/// Starting simplex around `x`: one vertex per free coordinate, offset by 5%
/// of the bound range (0.025% when `x` sits on a bound), pointing inwards
/// when the outward step would leave the box.
pub fn initial_simplex(space: &ParameterSpace, x: &[f64]) -> Vec<Vec<f64>> {
    let mut vertices = vec![x.to_vec()];
    for k in 0..space.dim() {
        let (lo, hi) = (space.lower()[k], space.upper()[k]);
        let on_edge = x[k] <= lo || x[k] >= hi;
        let step = if on_edge { EDGE_STEP } else { STEP } * space.range(k);
        let mut v = x.to_vec();
        v[k] = if x[k] + step <= hi {
            x[k] + step
        } else {
            x[k] - step
        };
        vertices.push(space.project(&v));
    }
    vertices
}

struct Simplex<'a, O: Objective + ?Sized> {
    objective: &'a O,
    counter: &'a EvalCounter,
    limits: Limits,
    vertices: Vec<Candidate>,
}

impl<O: Objective + ?Sized> Simplex<'_, O> {
    /// `None` once the budget is gone.
    fn eval(&self, x: Vec<f64>) -> Option<Candidate> {
        let x = self.objective.space().project(&x);
        evaluate_capped(self.counter, self.objective, &x, self.limits.eval_cap)
            .ok()
            .map(|l| Candidate::new(x, l))
    }

    fn sort(&mut self) {
        sort_candidates(&mut self.vertices);
    }

    fn converged(&self) -> bool {
        let space = self.objective.space();
        let best = &self.vertices[0];
        let worst = self.vertices.last().expect("non-empty simplex");
        let spread = worst.loss - best.loss;
        let size = self.vertices[1..]
            .iter()
            .flat_map(|v| {
                v.x.iter()
                    .zip(&best.x)
                    .enumerate()
                    .map(|(k, (a, b))| (a - b).abs() / space.range(k))
            })
            .fold(0.0, f64::max);
        size <= X_TOL
            || (spread.is_finite()
                && spread <= F_TOL * (1.0 + best.loss.abs())
                && size <= 1e3 * X_TOL)
    }

    fn point(&self, centroid: &[f64], toward: &[f64], coef: f64) -> Vec<f64> {
        centroid
            .iter()
            .zip(toward)
            .map(|(c, t)| c + coef * (t - c))
            .collect()
    }

    /// One iteration. `None` when the budget ran out mid-iteration.
    fn iterate(&mut self) -> Option<()> {
        self.sort();
        let n = self.vertices.len();
        let d = n - 1;
        let mut centroid = vec![0.0; d];
        for v in &self.vertices[..d] {
            for (c, x) in centroid.iter_mut().zip(&v.x) {
                *c += x / d as f64;
            }
        }
        let worst = self.vertices[d].clone();
        let (f_best, f_second) = (self.vertices[0].loss, self.vertices[d - 1].loss);
        let reflected = self.eval(self.point(&centroid, &worst.x, -REFLECT))?;
        if cmp_loss(reflected.loss, f_best).is_lt() {
            let expanded = self.eval(self.point(&centroid, &reflected.x, EXPAND))?;
            self.vertices[d] = if cmp_loss(expanded.loss, reflected.loss).is_lt() {
                expanded
            } else {
                reflected
            };
            return Some(());
        }
        if cmp_loss(reflected.loss, f_second).is_lt() {
            self.vertices[d] = reflected;
            return Some(());
        }
        let outside = cmp_loss(reflected.loss, worst.loss).is_lt();
        let contracted = if outside {
            self.eval(self.point(&centroid, &reflected.x, CONTRACT))?
        } else {
            self.eval(self.point(&centroid, &worst.x, CONTRACT))?
        };
        let accept = if outside {
            cmp_loss(contracted.loss, reflected.loss).is_le()
        } else {
            cmp_loss(contracted.loss, worst.loss).is_lt()
        };
        if accept {
            self.vertices[d] = contracted;
            return Some(());
        }
        let best = self.vertices[0].x.clone();
        for i in 1..n {
            let shrunk: Vec<f64> = best
                .iter()
                .zip(&self.vertices[i].x)
                .map(|(b, x)| b + SHRINK * (x - b))
                .collect();
            self.vertices[i] = self.eval(shrunk)?;
        }
        Some(())
    }
}

/// At most `max_steps` Nelder-Mead iterations from `start`; returns the best
/// vertex seen, so the result is never worse than `start`. Budget or time
/// exhaustion ends the run early with the best-so-far.
pub fn nm_run<O: Objective + ?Sized>(
    start: &Candidate,
    objective: &O,
    counter: &EvalCounter,
    limits: Limits,
    max_steps: usize,
) -> Candidate {
    if max_steps == 0 {
        return start.clone();
    }
    let mut simplex = Simplex {
        objective,
        counter,
        limits,
        vertices: vec![start.clone()],
    };
    for x in initial_simplex(objective.space(), &start.x)
        .into_iter()
        .skip(1)
    {
        match simplex.eval(x) {
            Some(c) => simplex.vertices.push(c),
            None => return best_of(simplex.vertices),
        }
    }
    for _ in 0..max_steps {
        if limits.time.is_some_and(|(t0, d)| t0.elapsed() >= d) {
            break;
        }
        simplex.sort();
        if simplex.converged() || simplex.iterate().is_none() {
            break;
        }
    }
    best_of(simplex.vertices)
}

fn best_of(vertices: Vec<Candidate>) -> Candidate {
    vertices
        .into_iter()
        .min_by(|a, b| cmp_candidates((a.loss, &a.x), (b.loss, &b.x)))
        .expect("start vertex")
}

/// Relative loss decrease from `old` to `new`; infinite when a finite loss
/// replaces an infeasible one.
fn relative_improvement(old: f64, new: f64) -> f64 {
    if !old.is_finite() {
        return if new.is_finite() { f64::INFINITY } else { 0.0 };
    }
    if old == new || old == 0.0 {
        return 0.0;
    }
    (old - new) / old.abs()
}

/// Restarts [`nm_run`] from its own incumbent with a fresh simplex until the
/// budget is gone or a run improves the loss by less than `rel_tol`.
pub fn nm_with_continuation<O: Objective + ?Sized>(
    start: &Candidate,
    objective: &O,
    counter: &EvalCounter,
    limits: Limits,
    max_steps: usize,
    rel_tol: f64,
) -> Candidate {
    let mut incumbent = start.clone();
    loop {
        if counter.remaining(limits.eval_cap) == 0
            || limits.time.is_some_and(|(t0, d)| t0.elapsed() >= d)
        {
            return incumbent;
        }
        let next = nm_run(&incumbent, objective, counter, limits, max_steps);
        let gain = relative_improvement(incumbent.loss, next.loss);
        incumbent = next;
        if gain < rel_tol {
            return incumbent;
        }
    }
}

/// Which archive members get refined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinePolicy {
    pub refine_best: bool,
    pub refine_prob: f64,
}

impl Default for RefinePolicy {
    fn default() -> Self {
        Self {
            refine_best: true,
            refine_prob: 0.0,
        }
    }
}

impl RefinePolicy {
    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.refine_prob) {
            Ok(())
        } else {
            Err(Error::InvalidOptions(format!(
                "refine_prob must lie in [0, 1], got {}",
                self.refine_prob
            )))
        }
    }
}

/// Refines the best member when `refine_best` is set and every other member
/// with probability `refine_prob`, then re-sorts. Returns the refined
/// members and the indices (pre-refinement order) that were selected.
///
/// The random draws happen up front, one per eligible member, so the
/// selection does not depend on how much budget the refinements use.
pub fn apply_refinement<O, R>(
    members: Vec<Candidate>,
    policy: RefinePolicy,
    rng: &mut R,
    objective: &O,
    counter: &EvalCounter,
    limits: Limits,
) -> (Vec<Candidate>, Vec<usize>)
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    let mut members = members;
    sort_candidates(&mut members);
    let selected: Vec<usize> = (0..members.len())
        .filter(|&i| {
            let drawn = rng.random::<f64>() < policy.refine_prob;
            (i == 0 && policy.refine_best) || drawn
        })
        .collect();
    for &i in &selected {
        members[i] = nm_with_continuation(
            &members[i],
            objective,
            counter,
            limits,
            DEFAULT_MAX_STEPS,
            DEFAULT_REL_TOL,
        );
    }
    sort_candidates(&mut members);
    (members, selected)
}
