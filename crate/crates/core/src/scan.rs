//! Per-split two-sample Cramér-von Mises statistics and their aggregates,
//! plus the mean-change scan.
//!
//! For a split at `c` the two-sample statistic compares the empirical cdf of
//! the first `c` observations with that of the remaining `d = n - c`,
//! integrating the squared difference against the pooled empirical cdf:
//!
//! ```text
//! W_n(c) = (cd/n) ∫ {F_c(x) - G_d(x)}² dH_n(x)
//! ```
//!
//! Writing `S_j` for the number of first-segment observations among the `j`
//! smallest pooled values, the integrand at the `j`-th order statistic is
//! `(n S_j - j c)² / (cd)²`, so
//!
//! ```text
//! W_n(c) = Σ_j (n S_j - j c)² / (n² c d)
//! ```
//!
//! with an integer numerator. Advancing the split from `c` to `c+1` moves a
//! single observation across, which updates every `A_j = n S_j - j c` in one
//! O(n) sweep; the whole scan is O(n²) and the numerators are exact, so rank
//! invariance and reversal symmetry hold bit for bit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sample::Sample;

/// Full per-split scan: every `W_n(c)`, their average and maximum, and the
/// maximizing split.
#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    /// `w[c-1]` is `W_n(c)` for `c = 1..=n-1`.
    pub w: Vec<f64>,
    /// Average of the per-split statistics.
    pub wbar: f64,
    /// Largest per-split statistic.
    pub wmax: f64,
    /// Smallest split index achieving the maximum, 1-based.
    pub c_hat: usize,
    /// True when the argmax is not unique.
    pub c_hat_tied: bool,
}

/// Mean-change scan: per-split standardized mean differences and the
/// variance-studentized aggregate.
#[derive(Debug, Clone, Serialize)]
pub struct MeanChangeResult {
    /// `t[c-1]` is `T_c` for `c = 1..=n-1` (unit-variance form).
    pub t: Vec<f64>,
    /// Average of the squared `T_c`.
    pub tbar2: f64,
    /// Half the mean squared successive difference; unbiased for the
    /// variance under the no-change hypothesis.
    pub s1sq: f64,
    /// `tbar2 / s1sq`.
    pub ts2: f64,
}

/// `W_n(c)` for a single split.
pub fn two_sample_cvm(sample: &Sample, c: usize) -> Result<f64> {
    let n = sample.n();
    if c < 1 || c > n - 1 {
        return Err(Error::SplitOutOfRange { c, max: n - 1 });
    }
    let ranks = sample.ranks();
    let mut in_first = vec![false; n + 1];
    for &r in &ranks[..c] {
        in_first[r] = true;
    }
    let n_i = n as i64;
    let c_i = c as i64;
    let mut s = 0i64;
    let mut ssq: u128 = 0;
    for j in 1..=n as i64 {
        if in_first[j as usize] {
            s += 1;
        }
        let a = n_i * s - j * c_i;
        ssq += (a * a) as u128;
    }
    Ok(w_from_ssq(ssq, n, c))
}

fn w_from_ssq(ssq: u128, n: usize, c: usize) -> f64 {
    let denom = (n as f64) * (n as f64) * (c as f64) * ((n - c) as f64);
    ssq as f64 / denom
}

/// Scans every split of the sequence.
pub fn scan(sample: &Sample) -> ScanResult {
    scan_values_ranked(&sample.ranks())
}

/// Scan from raw values assumed finite and pairwise distinct.
pub(crate) fn scan_values(values: &[f64]) -> ScanResult {
    scan_values_ranked(&ranks_of(values))
}

pub(crate) fn ranks_of(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        ranks[idx] = pos + 1;
    }
    ranks
}

fn scan_values_ranked(ranks: &[usize]) -> ScanResult {
    let n = ranks.len();
    debug_assert!(n >= 2);
    let n_i = n as i64;

    // A_j = n S_j - j c, for the current split c; exact in i64.
    let mut a = vec![0i64; n];
    {
        let r1 = ranks[0] as i64;
        for j in 1..=n_i {
            a[(j - 1) as usize] = if j >= r1 { n_i - j } else { -j };
        }
    }

    let mut w = Vec::with_capacity(n - 1);
    // Track the maximum as an exact fraction ssq / (c d); ties are decided
    // exactly, not through rounded f64 values.
    let mut best_ssq: u128 = 0;
    let mut best_cd: u128 = 0;
    let mut best_c = 0usize;
    let mut tied = false;
    // Neumaier-compensated accumulation of the split average.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;

    for c in 1..n {
        let mut ssq: u128 = 0;
        for &aj in a.iter() {
            ssq += (aj as i128 * aj as i128) as u128;
        }
        let wc = w_from_ssq(ssq, n, c);
        w.push(wc);
        let t = sum + wc;
        comp += if sum.abs() >= wc.abs() { (sum - t) + wc } else { (wc - t) + sum };
        sum = t;

        let cd = (c * (n - c)) as u128;
        if best_c == 0 {
            (best_ssq, best_cd, best_c) = (ssq, cd, c);
        } else {
            match cmp_fractions(ssq, cd, best_ssq, best_cd) {
                std::cmp::Ordering::Greater => {
                    (best_ssq, best_cd, best_c) = (ssq, cd, c);
                    tied = false;
                }
                std::cmp::Ordering::Equal => tied = true,
                std::cmp::Ordering::Less => {}
            }
        }

        if c < n - 1 {
            // Observation c+1 joins the first segment.
            let r = ranks[c] as i64;
            for j in 1..r {
                a[(j - 1) as usize] -= j;
            }
            for j in r..=n_i {
                a[(j - 1) as usize] += n_i - j;
            }
        }
    }

    ScanResult {
        wbar: (sum + comp) / (n - 1) as f64,
        wmax: w[best_c - 1],
        c_hat: best_c,
        c_hat_tied: tied,
        w,
    }
}

/// Compares `a/b` with `c/d` exactly when the cross products fit in u128,
/// falling back to floating point for astronomically large scans.
fn cmp_fractions(a: u128, b: u128, c: u128, d: u128) -> std::cmp::Ordering {
    match (a.checked_mul(d), c.checked_mul(b)) {
        (Some(lhs), Some(rhs)) => lhs.cmp(&rhs),
        _ => (a as f64 / b as f64).total_cmp(&(c as f64 / d as f64)),
    }
}

/// Per-split standardized mean differences and their aggregates.
pub fn mean_change_scan(sample: &Sample) -> Result<MeanChangeResult> {
    mean_change_values(sample.values())
}

pub(crate) fn mean_change_values(values: &[f64]) -> Result<MeanChangeResult> {
    let n = values.len();
    if n < 3 {
        return Err(Error::TooShort { required: 3, actual: n });
    }
    let total: f64 = values.iter().sum();
    let nf = n as f64;

    let mut t = Vec::with_capacity(n - 1);
    let mut prefix = 0.0f64;
    let mut tbar2_sum = 0.0f64;
    let mut tbar2_comp = 0.0f64;
    for c in 1..n {
        prefix += values[c - 1];
        let cf = c as f64;
        let df = nf - cf;
        let tc = (prefix / cf - (total - prefix) / df) / (1.0 / cf + 1.0 / df).sqrt();
        t.push(tc);
        let sq = tc * tc;
        let s = tbar2_sum + sq;
        tbar2_comp += if tbar2_sum.abs() >= sq {
            (tbar2_sum - s) + sq
        } else {
            (sq - s) + tbar2_sum
        };
        tbar2_sum = s;
    }
    let tbar2 = (tbar2_sum + tbar2_comp) / (nf - 1.0);

    let s1sq = values
        .windows(2)
        .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
        .sum::<f64>()
        / (2.0 * (nf - 1.0));
    if s1sq <= 0.0 {
        return Err(Error::DegenerateSample);
    }
    Ok(MeanChangeResult { tbar2, s1sq, ts2: tbar2 / s1sq, t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::TiePolicy;

    fn sample(values: &[f64]) -> Sample {
        Sample::new(values.to_vec(), TiePolicy::Reject).unwrap()
    }

    /// Direct evaluation of the defining integral: sum over the pooled
    /// points, each carrying mass 1/n under the pooled empirical cdf.
    fn direct_cvm(values: &[f64], c: usize) -> f64 {
        let n = values.len();
        let d = n - c;
        let mut total = 0.0;
        for x in values {
            let f = values[..c].iter().filter(|v| *v <= x).count() as f64 / c as f64;
            let g = values[c..].iter().filter(|v| *v <= x).count() as f64 / d as f64;
            total += (f - g) * (f - g) / n as f64;
        }
        (c * d) as f64 / n as f64 * total
    }

    #[test]
    fn smallest_case_is_one_quarter() {
        let s = sample(&[1.0, 2.0]);
        assert_eq!(two_sample_cvm(&s, 1).unwrap(), 0.25);
        let s = sample(&[2.0, 1.0]);
        assert_eq!(two_sample_cvm(&s, 1).unwrap(), 0.25);
    }

    #[test]
    fn four_point_sequence_matches_direct_sum() {
        let values = [1.0, 2.0, 3.0, 4.0];
        let s = sample(&values);
        let w = two_sample_cvm(&s, 2).unwrap();
        assert_eq!(w, 0.375);
        assert!((w - direct_cvm(&values, 2)).abs() < 1e-15);
    }

    #[test]
    fn rank_formula_equals_direct_sum_on_random_sequences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..60 {
            let n = rng.random_range(2..=30);
            let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let s = sample(&values);
            for c in 1..n {
                let fast = two_sample_cvm(&s, c).unwrap();
                let slow = direct_cvm(&values, c);
                let scale = slow.abs().max(1e-30);
                assert!(
                    ((fast - slow) / scale).abs() < 1e-12,
                    "n={n} c={c}: {fast} vs {slow}"
                );
            }
        }
    }

    #[test]
    fn split_bounds_are_enforced() {
        let s = sample(&[1.0, 2.0, 3.0]);
        assert!(matches!(two_sample_cvm(&s, 0), Err(Error::SplitOutOfRange { .. })));
        assert!(matches!(two_sample_cvm(&s, 3), Err(Error::SplitOutOfRange { .. })));
        assert!(two_sample_cvm(&s, 2).is_ok());
    }

    #[test]
    fn scan_matches_per_split_statistic() {
        let values = [0.3, -1.2, 4.0, 2.2, 0.9, -0.4, 3.1];
        let s = sample(&values);
        let result = scan(&s);
        assert_eq!(result.w.len(), values.len() - 1);
        for c in 1..values.len() {
            assert_eq!(result.w[c - 1], two_sample_cvm(&s, c).unwrap(), "split {c}");
        }
        let mean = result.w.iter().sum::<f64>() / result.w.len() as f64;
        assert!((result.wbar - mean).abs() < 1e-14);
        assert!(result.wmax >= result.wbar);
        assert_eq!(result.w[result.c_hat - 1], result.wmax);
    }

    #[test]
    fn scan_of_pair_is_single_split() {
        let r = scan(&sample(&[5.0, -3.0]));
        assert_eq!(r.w, vec![0.25]);
        assert_eq!(r.wbar, 0.25);
        assert_eq!(r.wmax, 0.25);
        assert_eq!(r.c_hat, 1);
        assert!(!r.c_hat_tied);
    }

    #[test]
    fn scan_is_rank_invariant_bit_for_bit() {
        let values: [f64; 8] = [0.3, -1.2, 4.0, 2.2, 0.9, -0.4, 3.1, 1.05];
        let mapped: Vec<f64> = values.iter().map(|x| x.exp()).collect();
        let r1 = scan(&sample(&values));
        let r2 = scan(&sample(&mapped));
        assert_eq!(r1.w, r2.w);
        assert_eq!(r1.wbar, r2.wbar);
        assert_eq!(r1.wmax, r2.wmax);
        assert_eq!(r1.c_hat, r2.c_hat);
    }

    #[test]
    fn reversal_maps_splits_exactly() {
        let values = [0.7, 2.0, -0.5, 1.4, 3.3, 0.1];
        let reversed: Vec<f64> = values.iter().rev().copied().collect();
        let r1 = scan(&sample(&values));
        let r2 = scan(&sample(&reversed));
        let n = values.len();
        for c in 1..n {
            assert_eq!(r1.w[c - 1], r2.w[n - c - 1], "split {c}");
        }
        assert_eq!(r1.wbar, r2.wbar);
        assert_eq!(r1.wmax, r2.wmax);
    }

    #[test]
    fn argmax_tie_takes_smallest_split_and_sets_flag() {
        // Ranks (3, 1, 4, 2) are invariant under reversal plus rank
        // complement, which forces all three splits to the same value.
        let r = scan(&sample(&[3.0, 1.0, 4.0, 2.0]));
        assert_eq!(r.w, vec![0.125, 0.125, 0.125]);
        assert_eq!(r.c_hat, 1);
        assert!(r.c_hat_tied);
    }

    #[test]
    fn mean_change_hand_computed() {
        let r = mean_change_scan(&sample(&[1.0, 2.0, 3.0])).unwrap();
        let t_expected = -(1.5f64).sqrt();
        assert!((r.t[0] - t_expected).abs() < 1e-15);
        assert!((r.t[1] - t_expected).abs() < 1e-15);
        assert!((r.tbar2 - 1.5).abs() < 1e-15);
        assert!((r.s1sq - 0.5).abs() < 1e-15);
        assert!((r.ts2 - 3.0).abs() < 1e-14);
    }

    #[test]
    fn mean_change_needs_three_points() {
        assert!(matches!(
            mean_change_scan(&sample(&[1.0, 2.0])),
            Err(Error::TooShort { required: 3, .. })
        ));
    }

    #[test]
    fn mean_change_location_and_scale_behaviour() {
        // T_c is exactly location-invariant, and ts2 is scale-free.
        let base = [0.4, -1.0, 2.3, 0.2, 1.7, -0.6];
        let shifted: Vec<f64> = base.iter().map(|x| x + 100.0).collect();
        let scaled: Vec<f64> = base.iter().map(|x| x * 7.0).collect();
        let r0 = mean_change_scan(&sample(&base)).unwrap();
        let r1 = mean_change_scan(&sample(&shifted)).unwrap();
        let r2 = mean_change_scan(&sample(&scaled)).unwrap();
        for (a, b) in r0.t.iter().zip(&r1.t) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((r0.ts2 - r2.ts2).abs() < 1e-12 * r0.ts2.abs());
    }
}
