use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal};

/// Successful `(CR, F)` pair with the loss improvement it produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Success {
    pub cr: f64,
    pub f: f64,
    pub improvement: f64,
}

/// Cyclic memory of successful crossover rates and mutation factors.
///
/// A `None` slot is the terminal value: a `CR` slot becomes terminal when all
/// successes of a generation used `CR = 0`, and then always yields `CR = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessHistory {
    m_cr: Vec<Option<f64>>,
    m_f: Vec<Option<f64>>,
    k: usize,
}

const SCALE: f64 = 0.1;
const FALLBACK_F: f64 = 0.5;

impl SuccessHistory {
    pub fn new(size: usize, cr_init: f64, f_init: f64) -> Self {
        assert!(size >= 1, "history needs at least one slot");
        Self {
            m_cr: vec![Some(cr_init); size],
            m_f: vec![Some(f_init); size],
            k: 0,
        }
    }

    /// Builds a history from explicit slots (terminal slots as `None`).
    pub fn from_slots(m_cr: Vec<Option<f64>>, m_f: Vec<Option<f64>>) -> Self {
        assert!(
            !m_cr.is_empty() && m_cr.len() == m_f.len(),
            "slot vectors must be non-empty and aligned"
        );
        Self { m_cr, m_f, k: 0 }
    }

    pub fn len(&self) -> usize {
        self.m_cr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m_cr.is_empty()
    }

    pub fn write_index(&self) -> usize {
        self.k
    }

    pub fn m_cr(&self) -> &[Option<f64>] {
        &self.m_cr
    }

    pub fn m_f(&self) -> &[Option<f64>] {
        &self.m_f
    }

    /// Draws `(CR, F)` from a uniformly chosen slot.
    ///
    /// `CR ~ N(M_CR, 0.1)` clipped to `[0, 1]`; `F ~ Cauchy(M_F, 0.1)` redrawn
    /// while non-positive and capped at 1. A terminal `M_F` slot borrows a
    /// random non-terminal slot, or 0.5 when every slot is terminal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let r = rng.random_range(0..self.len());
        let cr = match self.m_cr[r] {
            None => 0.0,
            Some(m) => Normal::new(m, SCALE)
                .expect("finite mean")
                .sample(rng)
                .clamp(0.0, 1.0),
        };
        let m_f = match self.m_f[r] {
            Some(m) => m,
            None => {
                let live: Vec<f64> = self.m_f.iter().flatten().copied().collect();
                if live.is_empty() {
                    FALLBACK_F
                } else {
                    live[rng.random_range(0..live.len())]
                }
            }
        };
        let cauchy = Cauchy::new(m_f, SCALE).expect("finite location");
        let f = loop {
            let f = cauchy.sample(rng);
            if f > 0.0 {
                break f;
            }
        };
        (cr, f.min(1.0))
    }

    /// Writes the improvement-weighted means of one generation's successes to
    /// the current slot and advances it. No successes: nothing changes.
    pub fn update(&mut self, successes: &[Success]) -> bool {
        if successes.is_empty() {
            return false;
        }
        let weights = improvement_weights(successes);
        let cr = successes
            .iter()
            .zip(&weights)
            .map(|(s, w)| w * s.cr)
            .sum::<f64>();
        let denom: f64 = successes.iter().zip(&weights).map(|(s, w)| w * s.f).sum();
        let f = successes
            .iter()
            .zip(&weights)
            .map(|(s, w)| (w * s.f / denom) * s.f)
            .sum::<f64>();
        let all_zero_cr = successes.iter().all(|s| s.cr == 0.0);
        self.m_cr[self.k] = if all_zero_cr { None } else { Some(cr) };
        self.m_f[self.k] = Some(f);
        self.k = (self.k + 1) % self.len();
        true
    }
}

/// Normalized weights proportional to the loss improvements. Improvements
/// from an infeasible parent are infinite; those share the weight equally.
fn improvement_weights(successes: &[Success]) -> Vec<f64> {
    let infinite = successes
        .iter()
        .filter(|s| !s.improvement.is_finite())
        .count();
    let raw: Vec<f64> = if infinite > 0 {
        successes
            .iter()
            .map(|s| if s.improvement.is_finite() { 0.0 } else { 1.0 })
            .collect()
    } else {
        successes.iter().map(|s| s.improvement).collect()
    };
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / successes.len() as f64; successes.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Mean of `N(mu, sigma)` clipped to `[0, 1]`, by composite Simpson
    /// quadrature of the clipped integrand.
    fn clipped_normal_mean(mu: f64, sigma: f64) -> f64 {
        let pdf = |x: f64| {
            (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let (a, b, n) = (mu - 12.0 * sigma, mu + 12.0 * sigma, 20_000);
        let h = (b - a) / n as f64;
        let g = |x: f64| x.clamp(0.0, 1.0) * pdf(x);
        let mut s = g(a) + g(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(x);
        }
        s * h / 3.0
    }

    #[test]
    fn cr_sample_mean_matches_clipped_normal() {
        let expected = clipped_normal_mean(0.9, 0.1);
        assert!((expected - 0.89167).abs() < 1e-4, "{expected}");
        let h = SuccessHistory::new(1, 0.9, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<(f64, f64)> = (0..10_000).map(|_| h.sample(&mut rng)).collect();
        let mean = draws.iter().map(|d| d.0).sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.9).abs() <= 0.02, "{mean}");
        assert!((mean - expected).abs() <= 0.005, "{mean} vs {expected}");
        assert!(draws
            .iter()
            .all(|&(cr, f)| (0.0..=1.0).contains(&cr) && f > 0.0 && f <= 1.0));
    }

    #[test]
    fn terminal_f_slot_borrows_live_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = SuccessHistory::from_slots(vec![Some(0.5), Some(0.5)], vec![None, Some(0.95)]);
        let mean = (0..4_000).map(|_| h.sample(&mut rng).1).sum::<f64>() / 4_000.0;
        assert!(mean > 0.8, "{mean}");
        let all_terminal = SuccessHistory::from_slots(vec![None], vec![None]);
        let draws: Vec<(f64, f64)> = (0..4_000).map(|_| all_terminal.sample(&mut rng)).collect();
        assert!(draws.iter().all(|d| d.0 == 0.0));
        let mut fs: Vec<f64> = draws.iter().map(|d| d.1).collect();
        fs.sort_by(f64::total_cmp);
        let median = fs[fs.len() / 2];
        assert!((median - 0.5).abs() < 0.02, "{median}");
    }

    #[test]
    fn single_success_is_written_exactly() {
        let mut h = SuccessHistory::new(3, 0.9, 0.5);
        assert!(h.update(&[Success {
            cr: 0.4,
            f: 0.7,
            improvement: 2.5
        }]));
        assert_eq!(h.m_cr()[0], Some(0.4));
        assert_eq!(h.m_f()[0], Some(0.7));
        assert_eq!(h.write_index(), 1);
    }

    #[test]
    fn weighted_means() {
        let mut h = SuccessHistory::new(2, 0.9, 0.5);
        h.update(&[
            Success {
                cr: 0.2,
                f: 0.2,
                improvement: 1.0,
            },
            Success {
                cr: 0.8,
                f: 0.8,
                improvement: 3.0,
            },
        ]);
        assert!((h.m_cr()[0].unwrap() - 0.65).abs() < 1e-15);
        // Lehmer: (0.25*0.04 + 0.75*0.64) / (0.25*0.2 + 0.75*0.8)
        assert!((h.m_f()[0].unwrap() - 0.49 / 0.65).abs() < 1e-15);
    }

    #[test]
    fn empty_update_is_noop_and_zero_cr_is_terminal() {
        let mut h = SuccessHistory::new(2, 0.9, 0.5);
        let before = h.clone();
        assert!(!h.update(&[]));
        assert_eq!(h, before);
        h.update(&[Success {
            cr: 0.0,
            f: 0.3,
            improvement: 1.0,
        }]);
        assert_eq!(h.m_cr()[0], None);
    }
}
