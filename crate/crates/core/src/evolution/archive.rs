use super::operators::{sort_candidates, Candidate};
use crate::loss::cmp_candidates;
use crate::objective::ParameterSpace;

/// Size-bounded set of diverse near-optimal candidates returned by a run.
///
/// Members are kept sorted best first. When a merge overflows the capacity,
/// the worse member of the closest pair (bounds-normalized Euclidean distance)
/// is dropped until the archive fits; the best member is never dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionArchive {
    members: Vec<Candidate>,
    capacity: usize,
    lower: Vec<f64>,
    range: Vec<f64>,
}

impl SolutionArchive {
    pub fn new(space: &ParameterSpace, capacity: usize) -> Self {
        let range = (0..space.dim()).map(|k| space.range(k)).collect();
        Self {
            members: Vec::new(),
            capacity,
            lower: space.lower().to_vec(),
            range,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Candidate] {
        &self.members
    }

    pub fn into_members(self) -> Vec<Candidate> {
        self.members
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.members.first()
    }

    /// Replaces the members wholesale (used after refinement), re-sorting.
    pub fn set_members(&mut self, mut members: Vec<Candidate>) {
        sort_candidates(&mut members);
        self.members = members;
    }

    /// Merges candidates with a finite loss, then crowds down to capacity.
    pub fn update(&mut self, incoming: &[Candidate]) {
        self.members
            .extend(incoming.iter().filter(|c| c.loss.is_finite()).cloned());
        if self.members.len() > self.capacity {
            self.crowd();
        }
        sort_candidates(&mut self.members);
    }

    fn distance2(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.range)
            .map(|((x, y), r)| ((x - y) / r).powi(2))
            .sum()
    }

    fn nearest(&self, i: usize, alive: &[bool]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (j, m) in self.members.iter().enumerate() {
            if j != i && alive[j] {
                let d = self.distance2(&self.members[i].x, &m.x);
                if d < best.1 {
                    best = (j, d);
                }
            }
        }
        best
    }

    fn crowd(&mut self) {
        let n = self.members.len();
        let ord = |a: usize, b: usize| {
            cmp_candidates(
                (self.members[a].loss, &self.members[a].x),
                (self.members[b].loss, &self.members[b].x),
            )
        };
        let best = (1..n).fold(0, |b, i| if ord(i, b).is_lt() { i } else { b });
        let mut alive = vec![true; n];
        let mut nn: Vec<(usize, f64)> = (0..n).map(|i| self.nearest(i, &alive)).collect();
        let mut count = n;
        while count > self.capacity {
            let i = (0..n)
                .filter(|&i| alive[i])
                .fold(None, |acc: Option<usize>, i| match acc {
                    Some(a) if nn[a].1 <= nn[i].1 => Some(a),
                    _ => Some(i),
                })
                .expect("archive not empty");
            let j = nn[i].0;
            let mut victim = if ord(j, i).is_gt() || (ord(j, i).is_eq() && j > i) {
                j
            } else {
                i
            };
            if victim == best {
                victim = if victim == i { j } else { i };
            }
            alive[victim] = false;
            count -= 1;
            for k in 0..n {
                if alive[k] && nn[k].0 == victim {
                    nn[k] = self.nearest(k, &alive);
                }
            }
        }
        let members = std::mem::take(&mut self.members);
        self.members = members
            .into_iter()
            .zip(alive)
            .filter(|(_, a)| *a)
            .map(|(m, _)| m)
            .collect();
    }

    /// Bounds-normalized coordinates of a member.
    pub fn normalized(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.range))
            .map(|(v, (l, r))| (v - l) / r)
            .collect()
    }
}
