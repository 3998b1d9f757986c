//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test -p multicalib --test acceptance`.

// The naive oracles index on purpose.
#![allow(clippy::needless_range_loop)]

use std::process::ExitCode;
use std::time::{Duration, Instant};

use multicalib::analytics::{report, LossStats, ParamStats};
use multicalib::bench;
use multicalib::charts::{
    density_heatmap, prediction_plot_data, render_svg, scatter, CellValue, Chart, Kde,
    PlotSelection, ScatterMode,
};
use multicalib::evolution::{run_engine, Candidate, EngineConfig, Limits, Parallelism, Variant};
use multicalib::loss::{mre, smse, EvalCounter, FnObjective, Objective};
use multicalib::objective::{
    builtin, Dataset, DatasetCollection, Himmelblau, Parameter, ParameterSpace, Predictions,
    Problem,
};
use multicalib::orchestrator::{
    calibrate, calibrate_traced, CalibrationOptions, InitMode, Method, SolutionSet, StopReason,
};
use multicalib::refine::{apply_refinement, nm_with_continuation, RefinePolicy};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- helpers

/// Random multi-dataset instance: up to 3 datasets of up to 5 points, at
/// least one of them with positive weight.
fn random_instance(rng: &mut ChaCha8Rng) -> (DatasetCollection, Predictions) {
    loop {
        let n_sets = rng.random_range(1..=3);
        let mut sets = Vec::new();
        let mut preds = Vec::new();
        for i in 0..n_sets {
            let n = rng.random_range(1..=5);
            let observed: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..100.0)).collect();
            let weights: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        0.0
                    } else {
                        rng.random_range(0.1..3.0)
                    }
                })
                .collect();
            let x: Vec<f64> = (0..n).map(|k| k as f64).collect();
            let ds = if n == 1 {
                Dataset::zero_variate(format!("d{i}"), observed[0]).unwrap()
            } else {
                Dataset::uni_variate(format!("d{i}"), x, observed).unwrap()
            };
            sets.push(ds.with_weights(weights).unwrap());
            preds.push((0..n).map(|_| rng.random_range(0.1..100.0)).collect());
        }
        if let Ok(data) = DatasetCollection::new(sets) {
            return (data, preds);
        }
    }
}

fn naive_mre(data: &DatasetCollection, preds: &Predictions) -> f64 {
    let mut total = 0.0;
    let mut active = 0;
    for i in 0..data.len() {
        let ds = &data.datasets()[i];
        let mut w_i = 0.0;
        let mut d_sum = 0.0;
        for j in 0..ds.len() {
            w_i += ds.weights[j];
            d_sum += ds.observed[j];
        }
        if w_i == 0.0 {
            continue;
        }
        active += 1;
        let d_mean = d_sum / ds.len() as f64;
        let mut s = 0.0;
        for j in 0..ds.len() {
            s += ds.weights[j] * (preds[i][j] - ds.observed[j]).abs() / d_mean.abs();
        }
        total += s / w_i;
    }
    total / active as f64
}

fn naive_smse(data: &DatasetCollection, preds: &Predictions) -> f64 {
    let mut total = 0.0;
    let mut active = 0;
    for i in 0..data.len() {
        let ds = &data.datasets()[i];
        let mut w_i = 0.0;
        let mut d_sum = 0.0;
        let mut p_sum = 0.0;
        for j in 0..ds.len() {
            w_i += ds.weights[j];
            d_sum += ds.observed[j];
            p_sum += preds[i][j];
        }
        if w_i == 0.0 {
            continue;
        }
        active += 1;
        let d_mean = d_sum / ds.len() as f64;
        let p_mean = p_sum / ds.len() as f64;
        let mut s = 0.0;
        for j in 0..ds.len() {
            s += ds.weights[j] * (preds[i][j] - ds.observed[j]).powi(2)
                / (d_mean * d_mean + p_mean * p_mean);
        }
        total += s / w_i;
    }
    total / active as f64
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

fn options(method: Method, evals: u64, num_results: usize, seed: u64) -> CalibrationOptions {
    CalibrationOptions {
        method,
        max_fun_evals: Some(evals),
        num_results,
        seed,
        ..Default::default()
    }
}

/// Euclidean distance in bounds-normalized coordinates.
fn normalized_distance(space: &ParameterSpace, a: &[f64], b: &[f64]) -> f64 {
    space
        .normalize(a)
        .iter()
        .zip(space.normalize(b))
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Set of `n` uniformly drawn himmelblau points scored by the real loss.
fn random_himmelblau_set(rng: &mut ChaCha8Rng, n: usize) -> (Problem, SolutionSet) {
    let problem = builtin::problem("himmelblau").unwrap();
    let members: Vec<Candidate> = (0..n)
        .map(|_| {
            let x = problem.space().sample_uniform(rng);
            let l = problem.loss(&x);
            Candidate::new(x, l)
        })
        .collect();
    let opts = options(Method::Shade, 1000, n, 0);
    let set =
        SolutionSet::from_candidates(&problem, &opts, members, n as u64, 0, StopReason::Evals)
            .unwrap();
    (problem, set)
}

// -------------------------------------------------------------- criteria

fn loss_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000 {
        let (data, preds) = random_instance(&mut rng);
        worst = worst
            .max(rel_err(
                mre(&data, &preds).unwrap(),
                naive_mre(&data, &preds),
            ))
            .max(rel_err(
                smse(&data, &preds).unwrap(),
                naive_smse(&data, &preds),
            ));
    }
    outcome(
        worst <= 1e-12,
        format!("max relative deviation {worst:.2e} over 1000 instances"),
    )
}

fn hand_values() -> Outcome {
    let data = DatasetCollection::new(vec![Dataset::uni_variate(
        "d",
        vec![0.0, 1.0],
        vec![1.0, 3.0],
    )
    .unwrap()])
    .unwrap();
    let preds = vec![vec![2.0, 3.0]];
    let m = mre(&data, &preds).unwrap();
    let s = smse(&data, &preds).unwrap();
    let pass = m == 0.25 && (s - 0.5 / 10.25).abs() <= 1e-12;
    outcome(
        pass,
        format!("MRE {m}, SMSE {s} (expected 0.25, {})", 0.5 / 10.25),
    )
}

fn smse_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    let mut max: f64 = 0.0;
    let mut min = f64::INFINITY;
    for _ in 0..10_000 {
        let (data, preds) = random_instance(&mut rng);
        let s = smse(&data, &preds).unwrap();
        max = max.max(s);
        min = min.min(s);
        if !(0.0..=1.0).contains(&s) {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!(
            "{violations}/10000 instances outside [0, 1]; observed range [{min:.3e}, {max:.3e}]"
        ),
    )
}

/// Counts every loss call; rejects vectors whose first coordinate is negative.
struct Counting<F> {
    inner: FnObjective<F>,
    calls: std::sync::atomic::AtomicU64,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for Counting<F> {
    fn space(&self) -> &ParameterSpace {
        self.inner.space()
    }
    fn accepts(&self, x: &[f64]) -> bool {
        x[0] >= 0.0
    }
    fn loss(&self, x: &[f64]) -> f64 {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        self.inner.loss(x)
    }
}

fn budget_invariant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let problems: Vec<Problem> = builtin::NAMES
        .iter()
        .map(|n| builtin::problem(n).unwrap())
        .collect();
    let mut failures = Vec::new();
    for case in 0..50 {
        // Full calibrations through the public entry point.
        let problem = &problems[rng.random_range(0..problems.len())];
        let method = [Method::Nm, Method::Shade, Method::Lshade][rng.random_range(0..3)];
        let budget = rng.random_range(50..4_000);
        let opts = CalibrationOptions {
            method,
            max_fun_evals: Some(budget),
            num_results: rng.random_range(6..120),
            refine_prob: rng.random_range(0.0..0.5),
            engine_fraction: rng.random_range(0.2..=1.0),
            init_mode: if rng.random_bool(0.5) {
                InitMode::Uniform
            } else {
                InitMode::SeedCentered
            },
            seed: case,
            ..Default::default()
        };
        match calibrate(problem, &opts) {
            Ok(set) if set.results.evaluations > budget => failures.push(format!(
                "case {case}: {} > {budget}",
                set.results.evaluations
            )),
            Ok(_) | Err(multicalib::Error::NoFeasibleSolution) => {}
            Err(e) => failures.push(format!("case {case}: {e}")),
        }

        // Engine + refinement with an independently counted objective whose
        // filter rejects half the box.
        let dim = rng.random_range(1..=4);
        let space = ParameterSpace::new(
            (0..dim)
                .map(|k| Parameter::free(format!("p{k}"), -1.0, 1.0, 0.5))
                .collect(),
        )
        .unwrap();
        let obj = Counting {
            inner: FnObjective::new(space, |x: &[f64]| x.iter().map(|v| (v - 0.3).powi(2)).sum()),
            calls: Default::default(),
        };
        let limit = rng.random_range(20..3_000);
        let counter = EvalCounter::new(limit);
        let variant = if rng.random_bool(0.5) {
            Variant::Shade
        } else {
            Variant::Lshade
        };
        let mut config = EngineConfig::new(variant, rng.random_range(6..80));
        config.n_min = 5;
        let engine_cap = limit * rng.random_range(1..=4) / 4;
        let mut erng = ChaCha8Rng::seed_from_u64(case);
        let par = if case % 2 == 0 {
            Parallelism::Serial
        } else {
            Parallelism::Threads
        };
        let run = run_engine(
            &obj,
            &counter,
            &config,
            &[],
            Limits::evals(engine_cap),
            &mut erng,
            par,
        )
        .unwrap();
        let policy = RefinePolicy {
            refine_best: true,
            refine_prob: 0.3,
        };
        apply_refinement(
            run.archive.into_members(),
            policy,
            &mut erng,
            &obj,
            &counter,
            Limits::evals(limit),
        );
        let calls = obj.calls.load(std::sync::atomic::Ordering::SeqCst);
        if calls > limit || calls != counter.count() {
            failures.push(format!(
                "objective case {case}: {calls} calls, counter {}, limit {limit}",
                counter.count()
            ));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "100 runs (50 calibrations, 50 counted engine runs) within budget".into()
        } else {
            failures.join("; ")
        },
    )
}

/// `round(n_init + (n_min - n_init) * used / max)` in exact integer
/// arithmetic, ties to even.
fn lpsr_oracle(used: u64, max: u64, n_init: u64, n_min: u64) -> u64 {
    let used = used.min(max);
    // n_init - (n_init - n_min) * used / max  as  num / max
    let num = n_init * max - (n_init - n_min) * used;
    let (q, r) = (num / max, num % max);
    match (2 * r).cmp(&max) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q % 2),
    }
}

fn lshade_lpsr() -> Outcome {
    let problem = builtin::problem("himmelblau").unwrap();
    let max = 20_000;
    let opts = CalibrationOptions {
        engine_fraction: 1.0,
        refine_best: false,
        ..options(Method::Lshade, max, 200, 5)
    };
    let cal = calibrate_traced(&problem, &opts, Parallelism::Serial).unwrap();
    let mut mismatches = 0;
    for rec in cal.trace.iter().skip(1) {
        if rec.population as u64 != lpsr_oracle(rec.evals, max, 200, 5) {
            mismatches += 1;
        }
    }
    let last = cal.trace.last().unwrap();
    let pass = mismatches == 0
        && cal.trace[0].population == 200
        && last.population == 5
        && last.evals == max;
    outcome(
        pass,
        format!(
            "{} generations, {mismatches} size mismatches, final population {} after {} evals",
            cal.trace.len() - 1,
            last.population,
            last.evals
        ),
    )
}

fn niche_coverage() -> Outcome {
    let problem = builtin::problem("himmelblau").unwrap();
    let space = problem.space().clone();
    let found: Vec<usize> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let opts = CalibrationOptions {
                refine_prob: 0.1,
                ..options(Method::Shade, 20_000, 100, seed)
            };
            let set = calibrate(&problem, &opts).unwrap();
            Himmelblau::MINIMA
                .iter()
                .filter(|m| {
                    set.solutions_set
                        .iter()
                        .any(|x| normalized_distance(&space, x, &m[..]) <= 1e-2)
                })
                .count()
        })
        .collect();
    let three = found.iter().filter(|&&k| k >= 3).count();
    let four = found.iter().filter(|&&k| k == 4).count();
    outcome(
        three >= 16 && four >= 10,
        format!("≥3 minima in {three}/20 runs, all 4 in {four}/20 (need 16 and 10)"),
    )
}

fn nm_vs_shade() -> Outcome {
    let problem = builtin::problem("multi_basin_growth").unwrap();
    let seeds: Vec<u64> = (0..20).collect();
    let cmp = bench::compare(&problem, 20_000, &seeds, 200, true).unwrap();
    let not_worse = cmp.shade_not_worse();
    let shortfall = cmp.worst_shortfall();
    let sizes = cmp.rows.iter().all(|r| r.shade_set_size == 200);
    outcome(
        not_worse >= 12 && shortfall <= 0.05 && sizes,
        format!(
            "SHADE ≤ NM in {not_worse}/20 ({} strictly), worst shortfall {:.2}%, set sizes 200 vs 1: {sizes}",
            cmp.shade_strictly_better(),
            100.0 * shortfall
        ),
    )
}

fn set_quality() -> Outcome {
    let problem = builtin::problem("toy_growth").unwrap();
    let gaps: Vec<f64> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let set = calibrate(&problem, &options(Method::Shade, 20_000, 200, seed)).unwrap();
            let mean = set.fun_values.iter().sum::<f64>() / set.set_size as f64;
            (mean - set.fun_values[0]) / set.fun_values[0]
        })
        .collect();
    let ok = gaps.iter().filter(|&&g| g <= 0.25).count();
    let mut sorted = gaps.clone();
    sorted.sort_by(f64::total_cmp);
    outcome(
        ok >= 16,
        format!(
            "{ok}/20 runs with mean/min gap ≤ 25% (need 16); median gap {:.3e}",
            sorted[10]
        ),
    )
}

fn refinement_monotone() -> Outcome {
    let problem = builtin::problem("toy_growth").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worse = 0;
    let mut starts = 0;
    while starts < 100 {
        let x = problem.space().sample_uniform(&mut rng);
        if !problem.accepts(&x) {
            continue;
        }
        starts += 1;
        let start = Candidate::new(x.clone(), problem.loss(&x));
        let counter = EvalCounter::new(50_000);
        let end =
            nm_with_continuation(&start, &problem, &counter, Limits::evals(50_000), 500, 1e-6);
        if end.loss > start.loss || end.loss.is_nan() {
            worse += 1;
        }
    }
    let mut quad = Vec::new();
    for dim in 1..=5 {
        let space = ParameterSpace::new(
            (0..dim)
                .map(|k| Parameter::free(format!("q{k}"), -5.0, 5.0, 1.0))
                .collect(),
        )
        .unwrap();
        let f = FnObjective::new(space, |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(k, v)| (k + 1) as f64 * (v - 0.25 * k as f64 + 0.4).powi(2))
                .sum()
        });
        let x0 = vec![1.0; dim];
        let start = Candidate::new(x0.clone(), f.loss(&x0));
        let counter = EvalCounter::new(200_000);
        quad.push(
            nm_with_continuation(&start, &f, &counter, Limits::evals(200_000), 500, 1e-6).loss,
        );
    }
    let quad_ok = quad.iter().all(|&l| l <= 1e-10);
    outcome(
        worse == 0 && quad_ok,
        format!(
            "{worse}/100 starts got worse; quadratic minima D=1..5: {}",
            quad.iter()
                .map(|l| format!("{l:.1e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn determinism() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let configs = [
        (
            "toy_growth",
            CalibrationOptions {
                ..options(Method::Shade, 3_000, 50, 1)
            },
        ),
        (
            "multi_basin_growth",
            CalibrationOptions {
                refine_prob: 0.2,
                ..options(Method::Lshade, 4_000, 60, 2)
            },
        ),
        (
            "himmelblau",
            CalibrationOptions {
                init_mode: InitMode::Uniform,
                ..options(Method::Shade, 2_000, 30, 3)
            },
        ),
        ("toy_growth", options(Method::Nm, 2_000, 1, 4)),
        (
            "himmelblau",
            CalibrationOptions {
                engine_fraction: 0.5,
                ..options(Method::Lshade, 5_000, 100, 5)
            },
        ),
    ];
    let mut differing = Vec::new();
    for (name, opts) in &configs {
        let problem = builtin::problem(name).unwrap();
        let serial = calibrate_traced(&problem, opts, Parallelism::Serial).unwrap();
        let threaded = pool
            .install(|| calibrate_traced(&problem, opts, Parallelism::Threads))
            .unwrap();
        if serial.solutions.to_json().unwrap() != threaded.solutions.to_json().unwrap() {
            differing.push(format!("{name}/{:?}", opts.method));
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            "5 configs byte-identical serial vs 4 threads".into()
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

const GOLDEN_REPORT: &str = include_str!("golden/report.txt");

/// Fixed hand-picked himmelblau set used by the golden report.
fn golden_set() -> (Problem, SolutionSet) {
    let problem = builtin::problem("himmelblau").unwrap();
    let points = [
        [3.0, 2.0],
        [-2.8, 3.1],
        [3.6, -1.8],
        [-3.75, -3.25],
        [0.0, 0.0],
        [1.0, -4.0],
        [-4.5, 4.5],
    ];
    let members = points
        .iter()
        .map(|p| Candidate::new(p.to_vec(), problem.loss(&p[..])))
        .collect();
    let opts = options(Method::Shade, 2_000, points.len(), 7);
    let set = SolutionSet::from_candidates(&problem, &opts, members, 2_000, 12, StopReason::Evals)
        .unwrap();
    (problem, set)
}

fn statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let uniform: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let bc = ParamStats::of("u", &uniform, 0.0, 1.0)
        .unwrap()
        .bimodality_coefficient
        .unwrap();
    let bc_ok = (bc - 0.555).abs() <= 0.02;

    let mut perm_ok = true;
    for trial in 0..50 {
        let n = rng.random_range(1..300);
        let mut v: Vec<f64> = (0..n)
            .map(|_| rng.random_range(-5.0..5.0f64).powi(3))
            .collect();
        if trial % 5 == 0 {
            v.truncate(3);
        }
        let p0 = ParamStats::of("v", &v, -125.0, 125.0).unwrap();
        let l0 = LossStats::of(&v).unwrap();
        v.shuffle(&mut rng);
        perm_ok &= p0 == ParamStats::of("v", &v, -125.0, 125.0).unwrap()
            && l0 == LossStats::of(&v).unwrap();
    }

    let (problem, set) = golden_set();
    let text = report(&set, problem.space()).unwrap().to_text();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(
            concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/report.txt"),
            &text,
        )
        .unwrap();
    }
    let golden_ok =
        text == GOLDEN_REPORT && text == report(&set, problem.space()).unwrap().to_text();
    outcome(
        bc_ok && perm_ok && golden_ok,
        format!("uniform BC {bc:.4}; permutation invariant: {perm_ok}; golden report matches: {golden_ok}"),
    )
}

fn charts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut count_ok = true;
    for _ in 0..100 {
        let n = rng.random_range(1..300);
        let (problem, set) = random_himmelblau_set(&mut rng, n);
        let bins = (rng.random_range(2..40), rng.random_range(2..40));
        let grid =
            density_heatmap(&set, problem.space(), "x", "y", bins, CellValue::Count).unwrap();
        let mut sum = 0;
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                sum += grid.count(ix, iy);
            }
        }
        count_ok &= sum == set.set_size && grid.total() == set.set_size;
    }

    let mut kde_worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(1..200);
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random(), rng.random::<f64>().sqrt()))
            .collect();
        let kde = Kde::new(pts.clone());
        let silverman = |vals: Vec<f64>| {
            let m = vals.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            let sd = if var > 0.0 { var.sqrt() } else { 1e-3 };
            sd * (n as f64).powf(-1.0 / 6.0)
        };
        let hx = silverman(pts.iter().map(|p| p.0).collect());
        let hy = silverman(pts.iter().map(|p| p.1).collect());
        for _ in 0..20 {
            let q: (f64, f64) = (rng.random(), rng.random());
            let mut direct = 0.0;
            for p in &pts {
                let kx = (-0.5 * ((q.0 - p.0) / hx).powi(2)).exp()
                    / (hx * (2.0 * std::f64::consts::PI).sqrt());
                let ky = (-0.5 * ((q.1 - p.1) / hy).powi(2)).exp()
                    / (hy * (2.0 * std::f64::consts::PI).sqrt());
                direct += kx * ky;
            }
            direct /= n as f64;
            kde_worst = kde_worst.max((kde.at(q) - direct).abs() / direct.abs().max(1.0));
        }
    }

    let problem = builtin::problem("toy_growth").unwrap();
    let set = calibrate(&problem, &options(Method::Shade, 2_000, 40, 3)).unwrap();
    let reloaded = SolutionSet::from_json(&set.to_json().unwrap()).unwrap();
    let charts_of = |s: &SolutionSet| -> Vec<Chart> {
        let space = problem.space();
        let grid = density_heatmap(s, space, "w_max", "r", (25, 25), CellValue::MinLoss).unwrap();
        let mut out = vec![
            Chart::Heatmap {
                grid: grid.clone(),
                overlay: None,
            },
            Chart::Heatmap {
                grid,
                overlay: Some(scatter(s, space, "w_max", "r", ScatterMode::Plain).unwrap()),
            },
        ];
        for mode in [
            ScatterMode::Plain,
            ScatterMode::Weighted,
            ScatterMode::Density,
        ] {
            out.push(Chart::Scatter(scatter(s, space, "t0", "b", mode).unwrap()));
        }
        for sel in [
            PlotSelection::Basic,
            PlotSelection::Best,
            PlotSelection::Set,
            PlotSelection::Complete,
        ] {
            out.push(Chart::Prediction(
                prediction_plot_data(s, sel, &problem).unwrap(),
            ));
        }
        out
    };
    let mut svg_bad = Vec::new();
    for (a, b) in charts_of(&set).iter().zip(charts_of(&reloaded)) {
        let svg = render_svg(a);
        if let Err(e) = roxmltree::Document::parse(&svg) {
            svg_bad.push(format!("{}: {e}", a.kind()));
        }
        if svg != render_svg(a) || svg != render_svg(&b) {
            svg_bad.push(format!("{}: unstable bytes", a.kind()));
        }
    }
    outcome(
        count_ok && kde_worst <= 1e-9 && svg_bad.is_empty(),
        format!(
            "heatmap totals exact: {count_ok}; KDE max deviation {kde_worst:.1e}; 9 SVGs well-formed and stable: {}",
            if svg_bad.is_empty() { "yes".to_string() } else { svg_bad.join(", ") }
        ),
    )
}

fn persistence() -> Outcome {
    use serde_json::{json, Value};
    let problem = builtin::problem("himmelblau").unwrap();
    let set = calibrate(&problem, &options(Method::Shade, 1_500, 12, 13)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    set.save(&a).unwrap();
    SolutionSet::load(&a).unwrap().save(&b).unwrap();
    let round_trip = std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap();

    let base: Value = serde_json::from_str(&set.to_json().unwrap()).unwrap();
    type Mutation = fn(&mut Value);
    let cases: [(&str, Mutation); 20] = [
        ("set_size", |v| {
            drop(v.as_object_mut().unwrap().remove("set_size"))
        }),
        ("set_size", |v| v["set_size"] = json!("twelve")),
        ("solutions_set", |v| v["set_size"] = json!(999)),
        ("schema_version", |v| v["schema_version"] = json!(7)),
        ("`9`", |v| v["schema_version"] = json!("9")),
        ("extra", |v| v["extra"] = json!(1)),
        ("par_names", |v| v["par_names"] = json!(["a", "b"])),
        ("solutions_set[0]", |v| v["solutions_set"][0] = json!([])),
        ("solutions_set[2]", |v| {
            v["solutions_set"][2][0] = json!(1e9)
        }),
        ("fun_values[0]", |v| v["fun_values"][0] = json!(-1.0)),
        ("fun_values[1]", |v| {
            v["fun_values"][1] = json!(0.0);
            v["results"]["solutions"][1]["loss"] = json!(0.0);
        }),
        ("fun_values", |v| v["fun_values"] = json!("none")),
        ("results.seed", |v| v["results"]["seed"] = json!(12345)),
        ("results.evaluations", |v| {
            v["results"]["evaluations"] = json!(-5)
        }),
        ("results.stop_reason", |v| {
            v["results"]["stop_reason"] = json!("bogus")
        }),
        ("results.options", |v| {
            v["results"]["options"]["refine_prob"] = json!(2.0)
        }),
        ("results.problem", |v| {
            v["results"]["problem"]["parameters"][0]["lower"] = json!(100.0)
        }),
        ("results.solutions[3].loss", |v| {
            v["results"]["solutions"][3]["loss"] = json!(123.0)
        }),
        ("results.solutions[0].parameters.x", |v| {
            v["results"]["solutions"][0]["parameters"]["x"] = json!(0.123)
        }),
        ("results.solutions[0].metrics.mre", |v| {
            v["results"]["solutions"][0]["metrics"]["mre"] = json!("x")
        }),
    ];
    let mut misses = Vec::new();
    for (field, mutate) in cases {
        let mut v = base.clone();
        mutate(&mut v);
        match SolutionSet::from_json(&v.to_string()) {
            Ok(_) => misses.push(format!("{field}: accepted")),
            Err(e) if !e.to_string().contains(field) => misses.push(format!("{field}: `{e}`")),
            Err(_) => {}
        }
    }
    outcome(
        round_trip && misses.is_empty(),
        format!(
            "save→load→save identical: {round_trip}; {}/20 mutations rejected naming the field{}",
            20 - misses.len(),
            if misses.is_empty() {
                String::new()
            } else {
                format!(" ({})", misses.join("; "))
            }
        ),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, Duration, fn() -> Outcome);
    let secs = Duration::from_secs;
    let criteria: [Criterion; 13] = [
        ("loss oracle equivalence", secs(1), loss_oracle),
        ("hand-computed metrics", secs(1), hand_values),
        ("SMSE within [0, 1]", secs(5), smse_bound),
        ("evaluation budget invariant", secs(60), budget_invariant),
        ("L-SHADE population reduction", secs(30), lshade_lpsr),
        ("multimodal niche coverage", secs(120), niche_coverage),
        ("NM vs SHADE comparison", secs(300), nm_vs_shade),
        ("solution set quality", secs(300), set_quality),
        ("refinement monotonicity", secs(30), refinement_monotone),
        ("determinism across parallelism", secs(120), determinism),
        ("statistics", secs(5), statistics),
        ("charts", secs(30), charts),
        ("persistence", secs(5), persistence),
    ];
    let filter = std::env::args().nth(1).filter(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if filter.as_deref().is_some_and(|f| f != id.to_string()) {
            continue;
        }
        let t0 = Instant::now();
        let out = run();
        let took = t0.elapsed();
        let pass = out.pass && took <= *limit;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {id:>2} {name}: {} [{:.2}s / {}s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
