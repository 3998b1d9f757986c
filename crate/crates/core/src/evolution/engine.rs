use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::archive::SolutionArchive;
use super::history::{Success, SuccessHistory};
use super::operators::{
    crossover_binomial, mutate_current_to_pbest, pick_indices, sort_candidates, Candidate,
    ExternalArchive,
};
use crate::error::{Error, Result};
use crate::loss::{cmp_candidates, cmp_loss, EvalCounter, Objective, INFEASIBLE};

/// Population engine flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Constant population size.
    Shade,
    /// Linear population size reduction from `n_init` to `n_min`.
    Lshade,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub variant: Variant,
    /// Size of the returned solution archive (also the initial population).
    pub archive_size: usize,
    pub n_init: usize,
    pub n_min: usize,
    pub history_size: usize,
    pub p_best: f64,
    pub cr_init: f64,
    pub f_init: f64,
}

impl EngineConfig {
    pub fn new(variant: Variant, archive_size: usize) -> Self {
        Self {
            variant,
            archive_size,
            n_init: archive_size,
            n_min: 5,
            history_size: 100,
            p_best: 0.11,
            cr_init: 0.9,
            f_init: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidOptions(m));
        if self.n_init < 4 {
            return bad(format!(
                "initial population {} is below the minimum of 4",
                self.n_init
            ));
        }
        if self.variant == Variant::Lshade && !(4..self.n_init).contains(&self.n_min) {
            return bad(format!(
                "need 4 <= n_min < n_init, got n_min={} n_init={}",
                self.n_min, self.n_init
            ));
        }
        if self.archive_size == 0 || self.history_size == 0 {
            return bad("archive and history sizes must be positive".into());
        }
        if !(self.p_best > 0.0 && self.p_best <= 1.0) {
            return bad(format!("p_best must lie in (0, 1], got {}", self.p_best));
        }
        if !(0.0..=1.0).contains(&self.cr_init) || !(self.f_init > 0.0 && self.f_init <= 1.0) {
            return bad("initial CR must lie in [0, 1] and F in (0, 1]".into());
        }
        Ok(())
    }
}

/// Whether objective evaluations of one generation fan out over threads.
/// Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Serial,
    Threads,
}

fn evaluate_all<O: Objective + ?Sized>(objective: &O, xs: &[&[f64]], par: Parallelism) -> Vec<f64> {
    match par {
        Parallelism::Serial => xs.iter().map(|x| objective.loss(x)).collect(),
        Parallelism::Threads => xs.par_iter().map(|x| objective.loss(x)).collect(),
    }
}

/// Budget and clock the engine runs under.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    /// Absolute counter value at which the engine stops.
    pub eval_cap: u64,
    /// Start instant and allowed wall time.
    pub time: Option<(Instant, Duration)>,
}

impl Limits {
    pub fn evals(eval_cap: u64) -> Self {
        Self {
            eval_cap,
            time: None,
        }
    }

    fn timed_out(&self) -> bool {
        self.time.is_some_and(|(start, d)| start.elapsed() >= d)
    }

    /// Fraction of the run consumed: the larger of the eval and time fractions.
    fn progress(&self, used: u64, budget: u64) -> f64 {
        let by_evals = if budget == 0 || budget == u64::MAX {
            0.0
        } else {
            used as f64 / budget as f64
        };
        let by_time = self.time.map_or(0.0, |(start, d)| {
            start.elapsed().as_secs_f64() / d.as_secs_f64().max(1e-12)
        });
        by_evals.max(by_time).clamp(0.0, 1.0)
    }
}

/// `round(n_init + (n_min - n_init) * used / max)` with ties to even.
pub fn lshade_population_size(
    evals_used: u64,
    max_fun_evals: u64,
    n_init: usize,
    n_min: usize,
) -> usize {
    let frac = if max_fun_evals == 0 {
        1.0
    } else {
        (evals_used.min(max_fun_evals)) as f64 / max_fun_evals as f64
    };
    population_at(frac, n_init, n_min)
}

fn population_at(progress: f64, n_init: usize, n_min: usize) -> usize {
    let n = n_init as f64 + (n_min as f64 - n_init as f64) * progress;
    n.round_ties_even() as usize
}

/// Mutable state of a SHADE run.
#[derive(Debug, Clone)]
pub struct EngineState {
    pub population: Vec<Candidate>,
    pub history: SuccessHistory,
    pub external: ExternalArchive,
    pub generation: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationReport {
    pub evaluations: u64,
    pub successes: usize,
    /// The budget ran out during this generation.
    pub exhausted: bool,
}

/// One SHADE sweep over the population.
///
/// Trials are generated sequentially from `rng`, filter-checked, granted
/// budget in member order, evaluated (possibly in parallel) and then applied
/// in member order. A trial replaces its parent when its loss is not worse;
/// strict improvements feed the success history and push the parent into the
/// external archive. If the budget runs out, members past the last granted
/// evaluation keep their parents.
pub fn shade_generation<O, R>(
    state: &mut EngineState,
    objective: &O,
    counter: &EvalCounter,
    eval_cap: u64,
    p_best: f64,
    rng: &mut R,
    par: Parallelism,
) -> Result<GenerationReport>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    let space = objective.space();
    let pop = &state.population;
    let n = pop.len();
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| cmp_candidates((pop[a].loss, &pop[a].x), (pop[b].loss, &pop[b].x)));

    let mut trials = Vec::with_capacity(n);
    for i in 0..n {
        let (cr, f) = state.history.sample(rng);
        let picks = pick_indices(&ranked, state.external.len(), i, p_best, rng)?;
        let donor = mutate_current_to_pbest(space, pop, &state.external, i, picks, f);
        let trial = crossover_binomial(&pop[i].x, &donor, cr, rng);
        trials.push((trial, cr, f));
    }

    let accepted: Vec<bool> = trials
        .iter()
        .map(|(t, _, _)| objective.accepts(t))
        .collect();
    let wanted = accepted.iter().filter(|a| **a).count() as u64;
    let granted = counter.reserve_upto(wanted, eval_cap);
    // members up to and including the last granted evaluation are processed
    let mut processed = n;
    let mut to_eval = Vec::with_capacity(granted as usize);
    for (i, ok) in accepted.iter().enumerate() {
        if *ok {
            if to_eval.len() as u64 == granted {
                processed = i;
                break;
            }
            to_eval.push(i);
        }
    }
    let xs: Vec<&[f64]> = to_eval.iter().map(|&i| trials[i].0.as_slice()).collect();
    let losses = evaluate_all(objective, &xs, par);
    let mut trial_loss = vec![INFEASIBLE; n];
    for (&i, l) in to_eval.iter().zip(losses) {
        trial_loss[i] = l;
    }

    let mut successes = Vec::new();
    for (i, (trial, cr, f)) in trials.into_iter().enumerate().take(processed) {
        let parent_loss = state.population[i].loss;
        let new_loss = trial_loss[i];
        if cmp_loss(new_loss, parent_loss).is_le() {
            let parent =
                std::mem::replace(&mut state.population[i], Candidate::new(trial, new_loss));
            if cmp_loss(new_loss, parent_loss).is_lt() {
                successes.push(Success {
                    cr,
                    f,
                    improvement: parent_loss - new_loss,
                });
                state.external.push(parent.x, rng);
            }
        }
    }
    state.history.update(&successes);
    state.generation += 1;
    Ok(GenerationReport {
        evaluations: granted,
        successes: successes.len(),
        exhausted: granted < wanted || counter.remaining(eval_cap) == 0,
    })
}

/// Per-generation engine snapshot, written as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub generation: usize,
    pub evals: u64,
    /// `None` when no member has a finite loss.
    pub best_loss: Option<f64>,
    pub mean_loss: Option<f64>,
    pub population: usize,
    pub m_cr: Vec<Option<f64>>,
    pub m_f: Vec<Option<f64>>,
}

impl TraceRecord {
    fn snapshot(state: &EngineState, evals: u64) -> Self {
        let finite: Vec<f64> = state
            .population
            .iter()
            .map(|c| c.loss)
            .filter(|l| l.is_finite())
            .collect();
        Self {
            generation: state.generation,
            evals,
            best_loss: finite.iter().copied().reduce(f64::min),
            mean_loss: (!finite.is_empty())
                .then(|| finite.iter().sum::<f64>() / finite.len() as f64),
            population: state.population.len(),
            m_cr: state.history.m_cr().to_vec(),
            m_f: state.history.m_f().to_vec(),
        }
    }
}

/// Outcome of [`run_engine`].
#[derive(Debug, Clone)]
pub struct EngineRun {
    pub archive: SolutionArchive,
    pub trace: Vec<TraceRecord>,
    pub generations: usize,
    pub timed_out: bool,
}

fn initial_population<O, R>(
    objective: &O,
    counter: &EvalCounter,
    n: usize,
    seeds: &[Vec<f64>],
    limits: &Limits,
    rng: &mut R,
    par: Parallelism,
) -> Vec<Candidate>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    const REDRAWS: usize = 100;
    let space = objective.space();
    let mut xs: Vec<Vec<f64>> = seeds.iter().take(n).cloned().collect();
    while xs.len() < n {
        let mut x = space.sample_uniform(rng);
        for _ in 0..REDRAWS {
            if objective.accepts(&x) {
                break;
            }
            x = space.sample_uniform(rng);
        }
        xs.push(x);
    }
    let accepted: Vec<bool> = xs.iter().map(|x| objective.accepts(x)).collect();
    let wanted = accepted.iter().filter(|a| **a).count() as u64;
    let granted = counter.reserve_upto(wanted, limits.eval_cap) as usize;
    let mut members = Vec::with_capacity(n);
    let mut to_eval = Vec::new();
    for (x, ok) in xs.into_iter().zip(accepted) {
        if ok {
            if to_eval.len() == granted {
                break;
            }
            to_eval.push(members.len());
        }
        members.push(Candidate::new(x, INFEASIBLE));
    }
    let refs: Vec<&[f64]> = to_eval.iter().map(|&i| members[i].x.as_slice()).collect();
    let losses = evaluate_all(objective, &refs, par);
    for (&i, l) in to_eval.iter().zip(losses) {
        members[i].loss = l;
    }
    members
}

/// Runs SHADE or L-SHADE until the eval cap or the time limit is reached.
///
/// `seeds` occupy the first population slots; the rest are drawn uniformly in
/// bounds (redrawing filter rejections, which cost no budget). The result
/// archive is merged after initialization and after every generation.
pub fn run_engine<O, R>(
    objective: &O,
    counter: &EvalCounter,
    config: &EngineConfig,
    seeds: &[Vec<f64>],
    limits: Limits,
    rng: &mut R,
    par: Parallelism,
) -> Result<EngineRun>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let start_evals = counter.count();
    let budget = limits
        .eval_cap
        .min(counter.limit())
        .saturating_sub(start_evals);
    let population =
        initial_population(objective, counter, config.n_init, seeds, &limits, rng, par);
    let mut archive = SolutionArchive::new(objective.space(), config.archive_size);
    archive.update(&population);
    let mut state = EngineState {
        population,
        history: SuccessHistory::new(config.history_size, config.cr_init, config.f_init),
        external: ExternalArchive::new(config.n_init),
        generation: 0,
    };
    let mut trace = vec![TraceRecord::snapshot(&state, counter.count() - start_evals)];
    let mut timed_out = false;
    while state.population.len() >= 4 && counter.remaining(limits.eval_cap) > 0 {
        if limits.timed_out() {
            timed_out = true;
            break;
        }
        let report = shade_generation(
            &mut state,
            objective,
            counter,
            limits.eval_cap,
            config.p_best,
            rng,
            par,
        )?;
        if config.variant == Variant::Lshade {
            let used = counter.count() - start_evals;
            let target = population_at(limits.progress(used, budget), config.n_init, config.n_min);
            if target < state.population.len() {
                sort_candidates(&mut state.population);
                for removed in state.population.split_off(target) {
                    state.external.push(removed.x, rng);
                }
                state.external.resize(target, rng);
            }
        }
        archive.update(&state.population);
        trace.push(TraceRecord::snapshot(&state, counter.count() - start_evals));
        if report.exhausted {
            break;
        }
    }
    Ok(EngineRun {
        archive,
        trace,
        generations: state.generation,
        timed_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::FnObjective;
    use crate::objective::{Parameter, ParameterSpace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sphere(d: usize) -> FnObjective<impl Fn(&[f64]) -> f64 + Sync> {
        let space = ParameterSpace::new(
            (0..d)
                .map(|k| Parameter::free(format!("x{k}"), -5.0, 5.0, 1.0))
                .collect(),
        )
        .unwrap();
        FnObjective::new(space, |x: &[f64]| x.iter().map(|v| v * v).sum())
    }

    #[test]
    fn population_size_schedule() {
        assert_eq!(lshade_population_size(0, 20_000, 200, 5), 200);
        assert_eq!(lshade_population_size(20_000, 20_000, 200, 5), 5);
        // 102.5 rounds to even
        assert_eq!(lshade_population_size(10_000, 20_000, 200, 5), 102);
    }

    #[test]
    fn all_worse_trials_change_nothing() {
        // every trial is infeasible-by-loss, so nothing beats the parents
        let space = ParameterSpace::new(vec![
            Parameter::free("a", 0.0, 1.0, 0.5),
            Parameter::free("b", 0.0, 1.0, 0.5),
        ])
        .unwrap();
        let obj = FnObjective::new(space, |_: &[f64]| 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop: Vec<Candidate> = (0..6)
            .map(|i| Candidate::new(vec![0.1 * i as f64, 0.5], 1.0))
            .collect();
        let mut state = EngineState {
            population: pop.clone(),
            history: SuccessHistory::new(5, 0.9, 0.5),
            external: ExternalArchive::new(6),
            generation: 0,
        };
        let counter = EvalCounter::new(1_000);
        let r = shade_generation(
            &mut state,
            &obj,
            &counter,
            u64::MAX,
            0.11,
            &mut rng,
            Parallelism::Serial,
        )
        .unwrap();
        assert_eq!(r.successes, 0);
        assert_eq!(r.evaluations, 6);
        assert_eq!(state.population, pop);
        assert_eq!(state.history, SuccessHistory::new(5, 0.9, 0.5));
        assert!(state.external.is_empty());
    }

    #[test]
    fn budget_cut_mid_generation() {
        let obj = sphere(2);
        let counter = EvalCounter::new(10_000);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = EngineConfig::new(Variant::Shade, 20);
        let run = run_engine(
            &obj,
            &counter,
            &cfg,
            &[],
            Limits::evals(50),
            &mut rng,
            Parallelism::Serial,
        )
        .unwrap();
        assert_eq!(counter.count(), 50);
        assert_eq!(run.generations, 2);
        assert_eq!(run.trace.last().unwrap().evals, 50);
    }

    #[test]
    fn best_loss_never_increases_and_shade_keeps_size() {
        let obj = sphere(3);
        let counter = EvalCounter::new(6_000);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = EngineConfig::new(Variant::Shade, 30);
        let run = run_engine(
            &obj,
            &counter,
            &cfg,
            &[],
            Limits::evals(6_000),
            &mut rng,
            Parallelism::Serial,
        )
        .unwrap();
        let best: Vec<f64> = run.trace.iter().map(|t| t.best_loss.unwrap()).collect();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        assert!(run.trace.iter().all(|t| t.population == 30));
        assert!(run.archive.best().unwrap().loss < 1e-6);
    }

    #[test]
    fn lshade_follows_linear_schedule() {
        let obj = sphere(2);
        let counter = EvalCounter::new(3_000);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = EngineConfig::new(Variant::Lshade, 40);
        let run = run_engine(
            &obj,
            &counter,
            &cfg,
            &[],
            Limits::evals(3_000),
            &mut rng,
            Parallelism::Serial,
        )
        .unwrap();
        for t in &run.trace[1..] {
            assert_eq!(
                t.population,
                lshade_population_size(t.evals, 3_000, 40, 5),
                "{t:?}"
            );
        }
        assert_eq!(run.trace.last().unwrap().population, 5);
    }

    #[test]
    fn serial_and_threaded_runs_match() {
        let obj = sphere(3);
        let cfg = EngineConfig::new(Variant::Lshade, 24);
        let run = |par| {
            let counter = EvalCounter::new(2_000);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            run_engine(
                &obj,
                &counter,
                &cfg,
                &[],
                Limits::evals(2_000),
                &mut rng,
                par,
            )
            .unwrap()
        };
        let (a, b) = (run(Parallelism::Serial), run(Parallelism::Threads));
        assert_eq!(a.archive, b.archive);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn seeds_fill_first_slots() {
        let obj = sphere(2);
        let counter = EvalCounter::new(100);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let seeds = vec![vec![0.25, 0.5], vec![1.0, 1.0]];
        let pop = initial_population(
            &obj,
            &counter,
            10,
            &seeds,
            &Limits::evals(100),
            &mut rng,
            Parallelism::Serial,
        );
        assert_eq!(pop[0].x, seeds[0]);
        assert_eq!(pop[1].x, seeds[1]);
        assert_eq!(pop[0].loss, 0.3125);
        assert_eq!(counter.count(), 10);
    }
}
