//! Synthetic calibration problems addressable as `builtin:<name>`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::data::{Dataset, DatasetCollection};
use super::model::{GrowthCurve, ModelSpec};
use super::problem::Problem;
use super::space::{Parameter, ParameterSpace};
use crate::error::{Error, Result};

pub const NAMES: [&str; 3] = ["toy_growth", "multi_basin_growth", "himmelblau"];

/// Generating parameters of the growth problems: `w_max`, `r`, `t0`, `b`.
pub const GROWTH_TRUTH: [f64; 4] = [50.0, 0.03, -5.0, 1.5];

const AGE: f64 = 365.0;
const NOISE_SEED: u64 = 0x5eed_0001;
const NOISE_REL_SD: f64 = 0.03;

/// Looks up a built-in problem; accepts the bare name or `builtin:<name>`.
pub fn problem(name: &str) -> Result<Problem> {
    match name.strip_prefix("builtin:").unwrap_or(name) {
        "toy_growth" => growth(false, NOISE_REL_SD),
        "multi_basin_growth" => growth(true, NOISE_REL_SD),
        "himmelblau" => himmelblau(),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

fn growth_times() -> Vec<f64> {
    (0..=20).map(|k| 10.0 * k as f64).collect()
}

fn growth_space(squared: bool) -> Result<ParameterSpace> {
    let rate = if squared {
        Parameter::free("s", -0.4, 0.4, 0.1)
    } else {
        Parameter::free("r", 0.005, 0.15, 0.05)
    };
    ParameterSpace::new(vec![
        Parameter::free("w_max", 10.0, 150.0, 40.0),
        rate,
        Parameter::free("t0", -30.0, 20.0, 0.0),
        Parameter::free("b", 0.5, 4.0, 1.0),
    ])
}

fn growth(squared: bool, noise: f64) -> Result<Problem> {
    let [w_max, r, t0, b] = GROWTH_TRUTH;
    let mut rng = ChaCha8Rng::seed_from_u64(NOISE_SEED);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut noisy = |v: f64| v * (1.0 + noise * unit.sample(&mut rng));
    let times = growth_times();
    let curve: Vec<f64> = times
        .iter()
        .map(|&t| noisy(GrowthCurve::weight(w_max, r, t0, b, t)))
        .collect();
    let at_age = noisy(GrowthCurve::weight(w_max, r, t0, b, AGE));
    let data = DatasetCollection::new(vec![
        Dataset::uni_variate("tW", times, curve)?,
        Dataset::zero_variate("Wa", at_age)?,
    ])?;
    let id = if squared {
        "multi_basin_growth"
    } else {
        "toy_growth"
    };
    Problem::new(
        growth_space(squared)?,
        data,
        ModelSpec::new(id).with_constant("zero_variate_age", AGE),
    )
}

fn himmelblau() -> Result<Problem> {
    let space = ParameterSpace::new(vec![
        Parameter::free("x", -5.0, 5.0, 0.0),
        Parameter::free("y", -5.0, 5.0, 0.0),
    ])?;
    let data = DatasetCollection::new(vec![Dataset::zero_variate("surface", 1.0)?])?;
    Problem::new(
        space,
        data,
        ModelSpec::new("himmelblau").with_constant("offset", 1.0),
    )
}

/// `toy_growth` without observation noise, plus its generating free vector.
pub fn toy_growth_noise_free() -> (Problem, Vec<f64>) {
    (
        growth(false, 0.0).expect("built-in problem"),
        GROWTH_TRUTH.to_vec(),
    )
}
