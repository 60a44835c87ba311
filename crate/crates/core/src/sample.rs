//! Validated observation sequences.
//!
//! Every statistic in this crate assumes independent draws from a continuous
//! law, so exact ties are evidence that the assumption is violated (or that
//! the data were rounded). Ties are therefore rejected by default; callers
//! that know their data were discretized can opt into deterministic jitter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// How [`Sample::new`] treats exact ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiePolicy {
    /// Fail with `TiesPresent` if any two observations are equal.
    Reject,
    /// Break ties by adding uniform noise of magnitude `1e-9 * range`,
    /// generated from the given seed.
    Jitter { seed: u64 },
}

/// Details of a jitter pass, kept for provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterInfo {
    pub seed: u64,
    pub ties_broken: usize,
    pub magnitude: f64,
}

/// An ordered sequence of finite, pairwise-distinct observations.
///
/// The index of an observation is meaningful: the change-point statistics
/// split the sequence at every position, so sequence order must be
/// observation order.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    jitter: Option<JitterInfo>,
}

impl Sample {
    /// Validates `raw` and returns a `Sample`.
    ///
    /// Fails with `NonFinite` if any value is NaN or infinite, `TooShort`
    /// if fewer than two observations are given, and `TiesPresent` if exact
    /// ties remain under the chosen policy.
    pub fn new(raw: Vec<f64>, tie_policy: TiePolicy) -> Result<Self> {
        let non_finite = raw.iter().filter(|v| !v.is_finite()).count();
        if non_finite > 0 {
            return Err(Error::NonFinite(non_finite));
        }
        if raw.len() < 2 {
            return Err(Error::TooShort { required: 2, actual: raw.len() });
        }
        let ties = count_ties(&raw);
        if ties == 0 {
            return Ok(Self { values: raw, jitter: None });
        }
        match tie_policy {
            TiePolicy::Reject => Err(Error::TiesPresent(ties)),
            TiePolicy::Jitter { seed } => Self::jittered(raw, seed, ties),
        }
    }

    fn jittered(mut values: Vec<f64>, seed: u64, ties: usize) -> Result<Self> {
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let magnitude = 1e-9 * (max - min);
        if magnitude == 0.0 {
            // A constant sequence has no scale to jitter at.
            return Err(Error::TiesPresent(ties));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in values.iter_mut() {
            *v += rng.random_range(-magnitude..magnitude);
        }
        if count_ties(&values) > 0 {
            return Err(Error::TiesPresent(count_ties(&values)));
        }
        Ok(Self {
            values,
            jitter: Some(JitterInfo { seed, ties_broken: ties, magnitude }),
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Jitter provenance, if tie-breaking noise was applied.
    pub fn jitter(&self) -> Option<&JitterInfo> {
        self.jitter.as_ref()
    }

    /// Ranks of each observation in the pooled order, 1-based.
    ///
    /// Well defined because values are pairwise distinct.
    pub(crate) fn ranks(&self) -> Vec<usize> {
        let n = self.values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by(|&i, &j| self.values[i].total_cmp(&self.values[j]));
        let mut ranks = vec![0usize; n];
        for (pos, &idx) in order.iter().enumerate() {
            ranks[idx] = pos + 1;
        }
        ranks
    }
}

/// Number of observations that collide with an earlier observation.
fn count_ties(values: &[f64]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    sorted.windows(2).filter(|w| w[0] == w[1]).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_untied_finite_values() {
        let s = Sample::new(vec![1.0, 2.0, 3.0], TiePolicy::Reject).unwrap();
        assert_eq!(s.n(), 3);
        assert!(s.jitter().is_none());
    }

    #[test]
    fn rejects_exact_tie() {
        assert!(matches!(
            Sample::new(vec![1.0, 1.0], TiePolicy::Reject),
            Err(Error::TiesPresent(1))
        ));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Sample::new(vec![1.0, f64::NAN], TiePolicy::Reject),
            Err(Error::NonFinite(1))
        ));
        assert!(matches!(
            Sample::new(vec![1.0, f64::INFINITY], TiePolicy::Reject),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn rejects_short_input() {
        assert!(matches!(
            Sample::new(vec![1.0], TiePolicy::Reject),
            Err(Error::TooShort { required: 2, actual: 1 })
        ));
        assert!(matches!(
            Sample::new(vec![], TiePolicy::Reject),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn jitter_breaks_ties_deterministically() {
        let raw = vec![1.0, 2.0, 2.0, 3.0];
        let a = Sample::new(raw.clone(), TiePolicy::Jitter { seed: 7 }).unwrap();
        let b = Sample::new(raw, TiePolicy::Jitter { seed: 7 }).unwrap();
        assert_eq!(a, b);
        let info = a.jitter().unwrap();
        assert_eq!(info.ties_broken, 1);
        assert!(info.magnitude > 0.0 && info.magnitude < 1e-8);
        // Perturbation stays at the stated magnitude.
        for (x, y) in a.values().iter().zip([1.0, 2.0, 2.0, 3.0]) {
            assert!((x - y).abs() < info.magnitude);
        }
    }

    #[test]
    fn jitter_cannot_fix_constant_sequence() {
        assert!(matches!(
            Sample::new(vec![5.0; 4], TiePolicy::Jitter { seed: 1 }),
            Err(Error::TiesPresent(_))
        ));
    }

    #[test]
    fn ranks_are_a_permutation() {
        let s = Sample::new(vec![0.3, -1.0, 2.5, 0.7], TiePolicy::Reject).unwrap();
        assert_eq!(s.ranks(), vec![2, 1, 4, 3]);
    }
}
