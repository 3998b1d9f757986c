//! End-to-end calibration runs: option handling, engine and refinement
//! sequencing, solution-set assembly and persistence.

mod options;
mod solution;
mod stopping;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use options::{CalibrationOptions, InitMode, Method, StopOn};
pub use solution::{Metrics, RunResults, SolutionRecord, SolutionSet, SOLUTION_SCHEMA_VERSION};
pub use stopping::{check_stopping, StopCheck, StopReason};

use crate::error::{Error, Result};
use crate::evolution::{
    run_engine, sort_candidates, Candidate, EngineConfig, Limits, Parallelism, TraceRecord, Variant,
};
use crate::loss::{evaluate_capped, EvalCounter};
use crate::objective::Problem;
use crate::refine::{apply_refinement, nm_with_continuation, DEFAULT_MAX_STEPS, DEFAULT_REL_TOL};

/// A finished run: the solution set plus the per-generation engine trace.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub solutions: SolutionSet,
    pub trace: Vec<TraceRecord>,
    /// Free vectors placed at the front of the initial population.
    pub seeded: Vec<Vec<f64>>,
}

/// Which prior solutions seed a continued run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    Best,
    Indices(Vec<usize>),
}

impl std::str::FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "best" {
            return Ok(Self::Best);
        }
        let idx = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| {
                Error::InvalidOptions(format!(
                    "selection must be `best` or comma-separated indices, got `{s}`"
                ))
            })?;
        if idx.is_empty() {
            return Err(Error::EmptySelection);
        }
        Ok(Self::Indices(idx))
    }
}

/// Runs a calibration with the given options.
pub fn calibrate(problem: &Problem, options: &CalibrationOptions) -> Result<SolutionSet> {
    calibrate_traced(problem, options, Parallelism::Serial).map(|c| c.solutions)
}

/// [`calibrate`] with a choice of evaluation parallelism and the engine trace.
/// The result does not depend on `par`.
pub fn calibrate_traced(
    problem: &Problem,
    options: &CalibrationOptions,
    par: Parallelism,
) -> Result<Calibration> {
    let seeds = match options.init_mode {
        InitMode::SeedCentered => vec![problem.space().initial_free()],
        InitMode::Uniform => Vec::new(),
    };
    run(problem, options, seeds, par)
}

/// Starts a new run from solutions of a previous one.
///
/// `problem` may fix parameters or narrow ranges relative to the prior run;
/// by default the prior problem is reused. Selected solutions must be feasible
/// in the new space.
pub fn continue_calibration(
    prior: &SolutionSet,
    selection: &Selection,
    problem: Option<&Problem>,
    options: &CalibrationOptions,
    par: Parallelism,
) -> Result<Calibration> {
    let owned;
    let problem = match problem {
        Some(p) => p,
        None => {
            owned = prior.problem()?;
            &owned
        }
    };
    let indices = match selection {
        Selection::Best => vec![0],
        Selection::Indices(v) if v.is_empty() => return Err(Error::EmptySelection),
        Selection::Indices(v) => v.clone(),
    };
    let space = problem.space();
    let mut seeds = Vec::with_capacity(indices.len());
    let mut offenders = Vec::new();
    for &i in &indices {
        let rec = prior
            .results
            .solutions
            .get(i)
            .ok_or(Error::SelectionOutOfRange {
                index: i,
                size: prior.set_size,
            })?;
        let mut free = Vec::with_capacity(space.dim());
        let mut why = Vec::new();
        for p in space.parameters().iter().filter(|p| p.free) {
            match rec.parameters.get(&p.name) {
                None => why.push(format!("no value for `{}`", p.name)),
                Some(&v) if !(p.lower..=p.upper).contains(&v) => why.push(format!(
                    "`{}` = {v} outside [{}, {}]",
                    p.name, p.lower, p.upper
                )),
                Some(&v) => free.push(v),
            }
        }
        if why.is_empty() && !problem.accepts(&free) {
            why.push("rejected by the model filter".into());
        }
        if why.is_empty() {
            seeds.push(free);
        } else {
            offenders.push((i, why.join(", ")));
        }
    }
    if !offenders.is_empty() {
        return Err(Error::InfeasibleSelection { offenders });
    }
    run(problem, options, seeds, par)
}

fn run(
    problem: &Problem,
    options: &CalibrationOptions,
    seeds: Vec<Vec<f64>>,
    par: Parallelism,
) -> Result<Calibration> {
    options.validate()?;
    let dim = problem.space().dim();
    let max_evals = options.effective_max_evals(dim);
    let counter = EvalCounter::new(max_evals);
    let started = Instant::now();
    let total_time = options.max_calibration_time.map(Duration::from_secs_f64);
    let full_limits = Limits {
        eval_cap: max_evals,
        time: total_time.map(|d| (started, d)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let (members, trace, generations) = match options.method {
        Method::Nm => {
            let x0 = seeds
                .first()
                .cloned()
                .unwrap_or_else(|| problem.space().initial_free());
            let loss = evaluate_capped(&counter, problem, &x0, max_evals)?;
            if !loss.is_finite() {
                return Err(Error::IllPosed(
                    "the starting parameters are infeasible for the model".into(),
                ));
            }
            let best = nm_with_continuation(
                &Candidate::new(x0, loss),
                problem,
                &counter,
                full_limits,
                DEFAULT_MAX_STEPS,
                DEFAULT_REL_TOL,
            );
            (vec![best], Vec::new(), 0)
        }
        Method::Shade | Method::Lshade => {
            let variant = if options.method == Method::Shade {
                Variant::Shade
            } else {
                Variant::Lshade
            };
            let config = EngineConfig::new(variant, options.num_results);
            let engine_cap = if max_evals == u64::MAX {
                u64::MAX
            } else {
                ((max_evals as f64) * options.engine_fraction).floor() as u64
            };
            let engine_time = total_time.map(|d| (started, d.mul_f64(options.engine_fraction)));
            let engine = run_engine(
                problem,
                &counter,
                &config,
                &seeds,
                Limits {
                    eval_cap: engine_cap,
                    time: engine_time,
                },
                &mut rng,
                par,
            )?;
            let (members, _) = apply_refinement(
                engine.archive.into_members(),
                options.refine_policy(),
                &mut rng,
                problem,
                &counter,
                full_limits,
            );
            (members, engine.trace, engine.generations)
        }
    };

    let stop_reason = match check_stopping(counter.count(), started.elapsed(), options, dim) {
        StopCheck::Stop(r) => r,
        StopCheck::Continue => StopReason::Converged,
    };
    let solutions = SolutionSet::from_candidates(
        problem,
        options,
        members,
        counter.count(),
        generations,
        stop_reason,
    )?;
    Ok(Calibration {
        solutions,
        trace,
        seeded: seeds,
    })
}

impl SolutionSet {
    /// Builds a set from sorted candidates, dropping infeasible ones.
    pub fn from_candidates(
        problem: &Problem,
        options: &CalibrationOptions,
        members: Vec<Candidate>,
        evaluations: u64,
        generations: usize,
        stop_reason: StopReason,
    ) -> Result<SolutionSet> {
        let space = problem.space();
        let mut members: Vec<Candidate> =
            members.into_iter().filter(|c| c.loss.is_finite()).collect();
        sort_candidates(&mut members);
        if members.is_empty() {
            return Err(Error::NoFeasibleSolution);
        }
        let mut records = Vec::with_capacity(members.len());
        for c in &members {
            let full = space.assemble(&c.x)?;
            records.push(SolutionRecord {
                parameters: space.names().into_iter().zip(full).collect(),
                loss: c.loss,
                metrics: Metrics::of(problem, &c.x),
            });
        }
        let best = records[0].metrics;
        Ok(SolutionSet {
            schema_version: SOLUTION_SCHEMA_VERSION.into(),
            set_size: members.len(),
            par_names: space.free_names(),
            fun_values: members.iter().map(|c| c.loss).collect(),
            solutions_set: members.into_iter().map(|c| c.x).collect(),
            results: RunResults {
                problem: problem.to_file(),
                options: options.clone(),
                seed: options.seed,
                evaluations,
                generations,
                stop_reason,
                best,
                solutions: records,
            },
        })
    }
}
