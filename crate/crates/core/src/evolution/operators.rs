use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::cmp_candidates;
use crate::objective::ParameterSpace;

/// Free-coordinate vector with its cached loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub x: Vec<f64>,
    pub loss: f64,
}

impl Candidate {
    pub fn new(x: Vec<f64>, loss: f64) -> Self {
        Self { x, loss }
    }
}

/// Sorts candidates best first with the lexicographic tie-break.
pub fn sort_candidates(members: &mut [Candidate]) {
    members.sort_by(|a, b| cmp_candidates((a.loss, &a.x), (b.loss, &b.x)));
}

/// Parents displaced by successful trials, used as difference-vector donors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalArchive {
    members: Vec<Vec<f64>>,
    capacity: usize,
}

impl ExternalArchive {
    pub fn new(capacity: usize) -> Self {
        Self {
            members: Vec::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.members[i]
    }

    /// Adds a vector; when full a uniformly random member is overwritten.
    pub fn push<R: Rng + ?Sized>(&mut self, x: Vec<f64>, rng: &mut R) {
        if self.capacity == 0 {
            return;
        }
        if self.members.len() < self.capacity {
            self.members.push(x);
        } else {
            let slot = rng.random_range(0..self.members.len());
            self.members[slot] = x;
        }
    }

    /// Shrinks the capacity, evicting uniformly random members.
    pub fn resize<R: Rng + ?Sized>(&mut self, capacity: usize, rng: &mut R) {
        self.capacity = capacity;
        while self.members.len() > capacity {
            let slot = rng.random_range(0..self.members.len());
            self.members.swap_remove(slot);
        }
    }
}

/// Indices chosen for one current-to-pbest/1 mutation. `r2` indexes the
/// population followed by the external archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Picks {
    pub pbest: usize,
    pub r1: usize,
    pub r2: usize,
}

/// Draws `pbest` among the `ceil(p_best * N)` best members (`ranked` is the
/// population sorted best first), `r1 != i` from the population and
/// `r2 ∉ {i, r1}` from population ∪ archive.
pub fn pick_indices<R: Rng + ?Sized>(
    ranked: &[usize],
    archive_len: usize,
    i: usize,
    p_best: f64,
    rng: &mut R,
) -> Result<Picks> {
    let n = ranked.len();
    if n < 4 {
        return Err(Error::EngineTooSmall { size: n });
    }
    let top = ((p_best * n as f64).ceil() as usize).clamp(1, n);
    let pbest = ranked[rng.random_range(0..top)];
    let r1 = loop {
        let r = rng.random_range(0..n);
        if r != i {
            break r;
        }
    };
    let r2 = loop {
        let r = rng.random_range(0..n + archive_len);
        if r != i && r != r1 {
            break r;
        }
    };
    Ok(Picks { pbest, r1, r2 })
}

/// `x_i + F (x_pbest - x_i) + F (x_r1 - x_r2)`, repaired into bounds by
/// midpoint reflection towards `x_i`.
pub fn mutate_current_to_pbest(
    space: &ParameterSpace,
    population: &[Candidate],
    archive: &ExternalArchive,
    i: usize,
    picks: Picks,
    f: f64,
) -> Vec<f64> {
    let n = population.len();
    let xi = &population[i].x;
    let xp = &population[picks.pbest].x;
    let x1 = &population[picks.r1].x;
    let x2 = if picks.r2 < n {
        &population[picks.r2].x[..]
    } else {
        archive.get(picks.r2 - n)
    };
    let donor: Vec<f64> = (0..xi.len())
        .map(|k| xi[k] + f * (xp[k] - xi[k]) + f * (x1[k] - x2[k]))
        .collect();
    space.clamp_to_bounds(&donor, xi)
}

/// Binomial crossover: each coordinate comes from the donor with
/// probability `cr`, and one uniformly chosen coordinate always does.
pub fn crossover_binomial<R: Rng + ?Sized>(
    parent: &[f64],
    donor: &[f64],
    cr: f64,
    rng: &mut R,
) -> Vec<f64> {
    let forced = rng.random_range(0..parent.len());
    parent
        .iter()
        .zip(donor)
        .enumerate()
        .map(|(k, (&p, &d))| {
            if k == forced || rng.random::<f64>() < cr {
                d
            } else {
                p
            }
        })
        .collect()
}
