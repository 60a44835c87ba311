//! Eigenstructure of the limiting covariance of the scan process.
//!
//! The limit law of the averaged statistic is a weighted sum of independent
//! chi-squares whose weights are the products
//!
//! ```text
//! λ_jk = 1 / (j(j+1) π² k²),   j, k = 1, 2, ...
//! ```
//!
//! of the Anderson-Darling kernel eigenvalues `1/(j(j+1))` and the Brownian
//! bridge eigenvalues `1/(π²k²)`. The matching eigenfunctions are associated
//! Legendre functions in the split coordinate and sines in the sample
//! coordinate. This module evaluates those pieces and produces truncations
//! that retain the `M` largest weights, replacing the neglected tail by its
//! expected value so the truncated law keeps the exact mean.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Position of one eigenvalue in the double array: `j` indexes the
/// Anderson-Darling factor, `k` the Brownian bridge factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EigenIndex {
    pub j: usize,
    pub k: usize,
}

/// Which spectrum a truncation is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    /// Product weights `1/(j(j+1)π²k²)`, total mean 1/6.
    Wbar,
    /// Anderson-Darling weights `1/(j(j+1))`, total mean 1.
    AndersonDarling,
}

impl SpectrumKind {
    pub fn total_mean(self) -> f64 {
        match self {
            SpectrumKind::Wbar => 1.0 / 6.0,
            SpectrumKind::AndersonDarling => 1.0,
        }
    }
}

/// The `M` largest weights of a spectrum together with the mean of the
/// neglected remainder.
#[derive(Debug, Clone)]
pub struct SpectrumTruncation {
    pub kind: SpectrumKind,
    /// Weights in nonincreasing order; exact ties are ordered by `j`, then `k`.
    pub entries: Vec<(EigenIndex, f64)>,
    /// Expected value of the neglected terms; added as a constant shift.
    pub remainder_mean: f64,
    /// Mean of the untruncated law.
    pub total_mean: f64,
}

impl SpectrumTruncation {
    pub fn retained(&self) -> usize {
        self.entries.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, w)| w).collect()
    }
}

/// Eigenvalue `λ_jk = 1/(j(j+1)π²k²)`.
pub fn lambda(j: usize, k: usize) -> Result<f64> {
    if j < 1 || k < 1 {
        return Err(Error::IndexOutOfRange(format!("lambda({j}, {k}) needs j, k >= 1")));
    }
    Ok(1.0 / (PI * PI * (j * (j + 1) * k * k) as f64))
}

/// Brownian bridge eigenfunction `√2 sin(πkt)`.
pub fn psi_eigenfunction(k: usize, t: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::IndexOutOfRange(format!("psi eigenfunction index {k}")));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::DomainError(format!("psi eigenfunction needs t in [0,1], got {t}")));
    }
    Ok(std::f64::consts::SQRT_2 * (PI * k as f64 * t).sin())
}

/// Anderson-Darling kernel eigenfunction
/// `2 √((2j+1)/(j(j+1))) √(s(1-s)) q_j(2s-1)`, extended by continuity to 0
/// at the endpoints.
///
/// The degree-(j-1) polynomials satisfy `q_1 = 1`, `q_2(u) = 3u`, and
/// `q_{j+1}(u) = {(2j+1) u q_j(u) - (j+1) q_{j-1}(u)} / j`; the recursion is
/// evaluated iteratively.
pub fn chi_eigenfunction(j: usize, s: f64) -> Result<f64> {
    if j < 1 {
        return Err(Error::IndexOutOfRange(format!("chi eigenfunction index {j}")));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::DomainError(format!("chi eigenfunction needs s in [0,1], got {s}")));
    }
    if s == 0.0 || s == 1.0 {
        return Ok(0.0);
    }
    let jf = j as f64;
    let norm = 2.0 * ((2.0 * jf + 1.0) / (jf * (jf + 1.0))).sqrt();
    Ok(norm * (s * (1.0 - s)).sqrt() * q_poly(j, 2.0 * s - 1.0))
}

fn q_poly(j: usize, u: f64) -> f64 {
    match j {
        1 => 1.0,
        2 => 3.0 * u,
        _ => {
            let mut prev = 1.0;
            let mut cur = 3.0 * u;
            for m in 2..j {
                let mf = m as f64;
                let next = ((2.0 * mf + 1.0) * u * cur - (mf + 1.0) * prev) / mf;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Which covariance kernel [`kernel`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Brownian bridge covariance `t∧t' - tt'` on [0,1]².
    Psi,
    /// Anderson-Darling kernel `ψ(s,s') / √(s(1-s)s'(1-s'))` on (0,1)².
    Chi,
}

/// Covariance kernel values, used by the eigen-relation checks.
pub fn kernel(kind: KernelKind, a: f64, b: f64) -> Result<f64> {
    match kind {
        KernelKind::Psi => {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
                return Err(Error::DomainError(format!("psi kernel needs [0,1]², got ({a}, {b})")));
            }
            Ok(a.min(b) - a * b)
        }
        KernelKind::Chi => {
            if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
                return Err(Error::DomainError(format!("chi kernel needs (0,1)², got ({a}, {b})")));
            }
            Ok((a.min(b) - a * b) / (a * (1.0 - a) * b * (1.0 - b)).sqrt())
        }
    }
}

/// Retains the `m` largest weights of the chosen spectrum.
///
/// For the product spectrum the weights are enumerated lazily from the
/// corner of the (j,k) grid: the weight decreases in each index, so a heap
/// seeded at (1,1) whose pops release (j,k+1), and (j+1,1) from the first
/// column, always yields the next-largest weight. Ordering uses the exact
/// integer key `j(j+1)k²`, so equal weights are detected exactly and broken
/// by `j`, then `k`.
///
/// # Panics
///
/// Panics if `m == 0`.
pub fn truncate_spectrum(kind: SpectrumKind, m: usize) -> SpectrumTruncation {
    assert!(m >= 1, "truncation size must be at least 1");
    let entries = match kind {
        SpectrumKind::AndersonDarling => (1..=m)
            .map(|j| (EigenIndex { j, k: 1 }, 1.0 / (j * (j + 1)) as f64))
            .collect::<Vec<_>>(),
        SpectrumKind::Wbar => {
            let key = |j: usize, k: usize| (j * (j + 1)) as u64 * (k * k) as u64;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((key(1, 1), 1usize, 1usize)));
            let mut entries = Vec::with_capacity(m);
            while entries.len() < m {
                let Reverse((kk, j, k)) = heap.pop().expect("frontier heap is never empty");
                entries.push((EigenIndex { j, k }, 1.0 / (PI * PI * kk as f64)));
                heap.push(Reverse((key(j, k + 1), j, k + 1)));
                if k == 1 {
                    heap.push(Reverse((key(j + 1, 1), j + 1, 1)));
                }
            }
            entries
        }
    };
    // Neumaier-compensated sum keeps the retained-plus-remainder identity
    // at the 1e-12 level even for very large m.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &(_, w) in &entries {
        let t = sum + w;
        comp += if sum.abs() >= w.abs() { (sum - t) + w } else { (w - t) + sum };
        sum = t;
    }
    let total_mean = kind.total_mean();
    SpectrumTruncation {
        kind,
        entries,
        remainder_mean: total_mean - (sum + comp),
        total_mean,
    }
}
