//! Tail probabilities and quantiles of weighted sums of noncentral
//! chi-squares,
//!
//! ```text
//! Q = Σ_i λ_i (Z_i + δ_i)² + m,   Z_i iid standard normal,
//! ```
//!
//! by numerical inversion of the characteristic function (Imhof's method),
//! plus a seeded Monte Carlo estimator that serves as an independent check.
//!
//! The inversion integral is
//!
//! ```text
//! P(Q > x) = 1/2 + (1/π) ∫_0^∞ sin θ(u) / (u ρ(u)) du
//! θ(u) = ½ Σ [atan(λ_i u) + δ_i² λ_i u/(1+λ_i²u²)] - ½(x-m)u
//! ρ(u) = Π (1+λ_i²u²)^{1/4} · exp{½ Σ (δ_i λ_i u)²/(1+λ_i²u²)}
//! ```
//!
//! With many weights the envelope `1/(uρ)` dies so fast that a finite
//! interval chosen from the analytic truncation bound suffices. With few
//! weights the bound pushes the cutoff absurdly far out; there the integral
//! is finished as an alternating series of half-period lobes of `sin θ`,
//! whose remainder is bounded by the last term.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::{adaptive_gk, adaptive_gk_seeded};
use crate::spectrum::{EigenIndex, SpectrumTruncation};

/// A law `Σ λ_i (Z_i + δ_i)² + m` with positive weights in nonincreasing
/// order.
#[derive(Debug, Clone)]
pub struct QuadFormSpec {
    weights: Vec<f64>,
    noncentralities: Vec<f64>,
    shift: f64,
    label: String,
}

impl QuadFormSpec {
    /// Validates and sorts the (weight, noncentrality) pairs by weight,
    /// largest first.
    pub fn new(
        weights: Vec<f64>,
        noncentralities: Vec<f64>,
        shift: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::DomainError("quadratic form needs at least one weight".into()));
        }
        if weights.len() != noncentralities.len() {
            return Err(Error::DomainError(format!(
                "{} weights but {} noncentralities",
                weights.len(),
                noncentralities.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::DomainError("weights must be finite and positive".into()));
        }
        if noncentralities.iter().any(|d| !d.is_finite()) {
            return Err(Error::DomainError("noncentralities must be finite".into()));
        }
        if !(shift.is_finite() && shift >= 0.0) {
            return Err(Error::DomainError(format!("shift must be nonnegative, got {shift}")));
        }
        let mut pairs: Vec<(f64, f64)> =
            weights.into_iter().zip(noncentralities).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (weights, noncentralities) = pairs.into_iter().unzip();
        Ok(Self { weights, noncentralities, shift, label: label.into() })
    }

    /// Central form: all noncentralities zero.
    pub fn central(weights: Vec<f64>, shift: f64, label: impl Into<String>) -> Result<Self> {
        let n = weights.len();
        Self::new(weights, vec![0.0; n], shift, label)
    }

    /// Central form of a truncated spectrum, shifted by the remainder mean.
    pub fn from_truncation(truncation: &SpectrumTruncation) -> Self {
        Self {
            weights: truncation.weights(),
            noncentralities: vec![0.0; truncation.retained()],
            shift: truncation.remainder_mean,
            label: format!("{:?} spectrum, M={}", truncation.kind, truncation.retained()),
        }
    }

    /// Noncentral form of a truncated spectrum: each retained eigenvalue
    /// gets the noncentrality assigned by `delta` (which also receives the
    /// weight); the neglected remainder keeps its central mean.
    pub fn from_truncation_noncentral(
        truncation: &SpectrumTruncation,
        mut delta: impl FnMut(EigenIndex, f64) -> f64,
    ) -> Self {
        Self {
            weights: truncation.weights(),
            noncentralities: truncation.entries.iter().map(|&(idx, w)| delta(idx, w)).collect(),
            shift: truncation.remainder_mean,
            label: format!("{:?} spectrum (noncentral), M={}", truncation.kind, truncation.retained()),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn noncentralities(&self) -> &[f64] {
        &self.noncentralities
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// E(Q) = Σ λ_i (1 + δ_i²) + m.
    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.noncentralities)
            .map(|(w, d)| w * (1.0 + d * d))
            .sum::<f64>()
            + self.shift
    }

    fn theta(&self, u: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for (&w, &d) in self.weights.iter().zip(&self.noncentralities) {
            let wu = w * u;
            acc += (wu).atan() + d * d * wu / (1.0 + wu * wu);
        }
        0.5 * (acc - y * u)
    }

    /// Phase derivative dθ/du.
    fn theta_deriv(&self, u: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for (&w, &d) in self.weights.iter().zip(&self.noncentralities) {
            let wu2 = (w * u) * (w * u);
            let denom = 1.0 + wu2;
            acc += w / denom + d * d * w * (1.0 - wu2) / (denom * denom);
        }
        0.5 * (acc - y)
    }

    fn log_rho(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (&w, &d) in self.weights.iter().zip(&self.noncentralities) {
            let wu2 = (w * u) * (w * u);
            acc += 0.25 * wu2.ln_1p() + 0.5 * d * d * wu2 / (1.0 + wu2);
        }
        acc
    }

    fn integrand(&self, u: f64, y: f64) -> f64 {
        if u == 0.0 {
            return self.theta_deriv(0.0, y);
        }
        self.theta(u, y).sin() * (-self.log_rho(u)).exp() / u
    }
}

/// Tail probability with diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct TailProbability {
    /// P(Q > x), clamped to [0, 1].
    pub p: f64,
    /// Certified absolute error of the inversion.
    pub abs_error: f64,
    /// True when oscillatory cancellation produced a value slightly outside
    /// [0, 1] that was clamped.
    pub clamped: bool,
}

/// Options for [`imhof_tail_with`].
#[derive(Debug, Clone, Copy)]
pub struct ImhofOptions {
    /// Absolute accuracy target for the returned probability.
    pub abs_tol: f64,
    /// Subdivision budget for the adaptive rule.
    pub max_subdiv: usize,
    /// Cap on the number of alternating lobes in the tail sum.
    pub max_lobes: usize,
}

impl Default for ImhofOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-6, max_subdiv: 4000, max_lobes: 200_000 }
    }
}

/// P(Q > x) by Imhof inversion at the default 1e-6 absolute accuracy.
pub fn imhof_tail(spec: &QuadFormSpec, x: f64) -> Result<f64> {
    Ok(imhof_tail_with(spec, x, &ImhofOptions::default())?.p)
}

/// P(Q > x) by Imhof inversion, with explicit accuracy control and
/// diagnostics.
pub fn imhof_tail_with(spec: &QuadFormSpec, x: f64, opts: &ImhofOptions) -> Result<TailProbability> {
    let y = x - spec.shift;
    if y <= 0.0 {
        // Q - m is almost surely positive.
        return Ok(TailProbability { p: 1.0, abs_error: 0.0, clamped: false });
    }
    // Far in the upper tail the inversion integrand oscillates violently,
    // but a Chernoff bound on the moment generating function already
    // certifies the probability below the accuracy target; return the
    // bound instead of integrating.
    let log_bound = chernoff_log_bound(spec, y);
    if log_bound <= (0.5 * opts.abs_tol).ln() {
        let bound = log_bound.exp();
        return Ok(TailProbability { p: bound, abs_error: bound, clamped: false });
    }

    // Work in units of the raw integral I; P = 1/2 + I/π.
    let tol_i = opts.abs_tol * std::f64::consts::PI;
    let k = spec.weights.len() as f64;
    let sum_log_w: f64 = spec.weights.iter().map(|w| w.ln()).sum();

    // Imhof's truncation bound: ∫_U^∞ |g| ≤ Π λ_i^{-1/2} (2/K) U^{-K/2}.
    let cutoff_for = |budget: f64| -> f64 {
        ((2.0f64.ln() - k.ln() - 0.5 * sum_log_w - budget.ln()) * 2.0 / k).exp()
    };

    // |θ'| never exceeds (Σλ_i(1+δ_i²) + y)/2; seeding the adaptive rule
    // with panels of half that period keeps the oscillation resolved, which
    // the Kronrod error estimate needs to be trustworthy.
    let omega = 0.5 * ((spec.mean() - spec.shift) + y);
    let panel_width = std::f64::consts::PI / omega;
    const MAX_DIRECT_PANELS: f64 = 4000.0;

    let u_star = cutoff_for(tol_i / 2.0);
    let direct_panels = (u_star / panel_width).ceil();

    let (integral, err) = if direct_panels <= MAX_DIRECT_PANELS {
        let r = adaptive_gk_seeded(
            &|u| spec.integrand(u, y),
            0.0,
            u_star,
            direct_panels as usize,
            tol_i / 2.0,
            opts.max_subdiv,
        )?;
        (r.value, r.abs_error + tol_i / 2.0)
    } else {
        imhof_hybrid(spec, y, panel_width, tol_i, opts)?
    };

    let p_raw = 0.5 + integral / std::f64::consts::PI;
    let abs_error = err / std::f64::consts::PI;
    let clamped = !(0.0..=1.0).contains(&p_raw);
    if p_raw < -10.0 * opts.abs_tol || p_raw > 1.0 + 10.0 * opts.abs_tol {
        return Err(Error::ToleranceNotMet(format!(
            "inversion for {} returned {p_raw}, far outside [0,1]",
            spec.label
        )));
    }
    Ok(TailProbability { p: p_raw.clamp(0.0, 1.0), abs_error, clamped })
}

/// `min_t ln{ E exp(t(Q - m)) e^{-ty} }` over a grid of t below the MGF pole:
/// an upper bound for `ln P(Q - m > y)`.
fn chernoff_log_bound(spec: &QuadFormSpec, y: f64) -> f64 {
    let w_max = spec.weights[0];
    let mut best = f64::INFINITY;
    for i in 1..20 {
        let t = i as f64 / 20.0 / (2.0 * w_max);
        let mut lp = -t * y;
        for (&w, &d) in spec.weights.iter().zip(&spec.noncentralities) {
            let r = 2.0 * t * w;
            lp += -0.5 * (1.0 - r).ln() + d * d * t * w / (1.0 - r);
        }
        best = best.min(lp);
    }
    best
}

/// Body integral to a rigorously-decreasing-phase point, then an
/// alternating sum over half-period lobes of `sin θ`.
fn imhof_hybrid(
    spec: &QuadFormSpec,
    y: f64,
    panel_width: f64,
    tol_i: f64,
    opts: &ImhofOptions,
) -> Result<(f64, f64)> {
    // Beyond any u with λ_i u ≥ 1 for all i and Σ λ_i/(1+λ_i²u²) ≤ y/2 the
    // phase derivative stays below -y/4: the central part of θ' is
    // decreasing in u there and the noncentral part is nonpositive.
    let w_min = *spec.weights.last().expect("spec has weights");
    let mut u0 = (1.0 / w_min).max(1.0);
    let mut guard = 0;
    loop {
        let central: f64 = spec
            .weights
            .iter()
            .map(|&w| {
                let wu2 = (w * u0) * (w * u0);
                w / (1.0 + wu2)
            })
            .sum();
        if central <= 0.5 * y {
            break;
        }
        u0 *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::ToleranceNotMet(
                "could not locate the oscillatory regime of the inversion integrand".into(),
            ));
        }
    }

    let body_panels = (u0 / panel_width).ceil();
    if body_panels > 20_000.0 {
        return Err(Error::ToleranceNotMet(format!(
            "inversion integrand for {} mixes scales too widely ({} panels needed)",
            spec.label, body_panels
        )));
    }
    let body = adaptive_gk_seeded(
        &|u| spec.integrand(u, y),
        0.0,
        u0,
        body_panels as usize,
        tol_i / 3.0,
        opts.max_subdiv,
    )?;
    let mut total = body.value;
    let mut err = body.abs_error;

    // Lobe boundaries: θ decreasing through consecutive multiples of π.
    let lobe_tol = tol_i / 3.0;
    let theta0 = spec.theta(u0, y);
    let mut target = (theta0 / std::f64::consts::PI).floor() * std::f64::consts::PI;
    if target >= theta0 {
        target -= std::f64::consts::PI;
    }
    let integrate_lobe = |lo: f64, hi: f64| {
        adaptive_gk(&|u| spec.integrand(u, y), lo, hi, lobe_tol * 1e-3, 200)
            .or_else(|_| adaptive_gk(&|u| spec.integrand(u, y), lo, hi, lobe_tol * 0.1, 400))
    };

    // The stretch from u0 to the first phase boundary is a partial lobe; it
    // carries no information about the size of later terms, so it must not
    // feed the alternating-series stopping rule.
    let mut u_here = phase_crossing(spec, y, u0, target)?;
    let sliver = integrate_lobe(u0, u_here)?;
    total += sliver.value;
    err += sliver.abs_error;
    target -= std::f64::consts::PI;

    let mut last_mag = f64::INFINITY;
    let mut done = false;
    for _ in 0..opts.max_lobes {
        let u_next = phase_crossing(spec, y, u_here, target)?;
        let lobe = integrate_lobe(u_here, u_next)?;
        total += lobe.value;
        err += lobe.abs_error;
        let mag = lobe.value.abs();
        // Full lobes alternate in sign with decreasing magnitude, so the
        // tail beyond this lobe is bounded by the lobe itself.
        if mag <= lobe_tol && mag <= last_mag {
            err += mag;
            done = true;
            break;
        }
        last_mag = mag;
        u_here = u_next;
        target -= std::f64::consts::PI;
    }
    if !done {
        return Err(Error::ToleranceNotMet(format!(
            "alternating tail of the inversion integral did not converge within {} lobes",
            opts.max_lobes
        )));
    }
    Ok((total, err))
}

/// Solves θ(u) = target for u > u_here, given that θ is strictly decreasing
/// past u_here. Newton from the left bracket edge with bisection fallback.
fn phase_crossing(spec: &QuadFormSpec, y: f64, u_here: f64, target: f64) -> Result<f64> {
    // Bracket by stepping a nominal half period.
    let step = 2.0 * std::f64::consts::PI / y;
    let mut lo = u_here;
    let mut hi = u_here + step;
    let mut guard = 0;
    while spec.theta(hi, y) > target {
        lo = hi;
        hi += step;
        guard += 1;
        if guard > 10_000 {
            return Err(Error::ToleranceNotMet("phase crossing search ran away".into()));
        }
    }
    // Bisection with a Newton polish; 80 rounds of bisection always suffice
    // for f64 resolution.
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if spec.theta(mid, y) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = spec.theta_deriv(u, y);
        if d == 0.0 {
            break;
        }
        let next = u - (spec.theta(u, y) - target) / d;
        if next > lo && next < hi {
            u = next;
        } else {
            break;
        }
    }
    Ok(u)
}

/// Monte Carlo tail estimate with its binomial standard error.
#[derive(Debug, Clone, Copy)]
pub struct McTail {
    pub p: f64,
    pub se: f64,
    pub draws: u64,
}

/// Simulates `P(Q > x)` from `draws` independent realizations.
///
/// Replicates are generated in fixed-size blocks, each from its own counter
/// seeded stream, so the estimate is reproducible for a given seed no
/// matter how the blocks are scheduled across threads.
pub fn mc_tail(spec: &QuadFormSpec, x: f64, draws: u64, seed: u64) -> McTail {
    const BLOCK: u64 = 1 << 14;
    let blocks = draws.div_ceil(BLOCK);
    let exceed: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(draws);
            let mut count = 0u64;
            for _ in lo..hi {
                let mut q = spec.shift;
                for (&w, &d) in spec.weights.iter().zip(&spec.noncentralities) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let zd = z + d;
                    q += w * zd * zd;
                }
                if q > x {
                    count += 1;
                }
            }
            count
        })
        .sum();
    let p = exceed as f64 / draws as f64;
    McTail { p, se: (p * (1.0 - p) / draws as f64).sqrt(), draws }
}

/// Upper-α quantile: the x with `imhof_tail(spec, x) = alpha`.
///
/// Starts from the bracket `[m, m + 50·Σλ_i(1+δ_i²)]` and refines by an
/// Illinois-damped false-position iteration until the tail probability at
/// the returned point is within 1e-6 of `alpha`.
pub fn quantile(spec: &QuadFormSpec, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::DomainError(format!("quantile needs alpha in (0,1), got {alpha}")));
    }
    let opts = ImhofOptions { abs_tol: 2.5e-7, ..ImhofOptions::default() };
    let tail = |x: f64| -> Result<f64> { Ok(imhof_tail_with(spec, x, &opts)?.p) };

    let mut lo = spec.shift;
    let mut flo = 1.0; // tail at the shift is 1
    let spread: f64 = 50.0 * (spec.mean() - spec.shift);
    let mut hi = spec.shift + spread.max(1e-12);
    let mut fhi = tail(hi)?;
    let mut guard = 0;
    while fhi > alpha {
        lo = hi;
        flo = fhi;
        hi += spread;
        fhi = tail(hi)?;
        guard += 1;
        if guard > 60 {
            return Err(Error::ToleranceNotMet(format!(
                "could not bracket the {alpha} quantile of {}",
                spec.label()
            )));
        }
    }

    let target_tol = 5e-7;
    let mut side = 0i32;
    for _ in 0..200 {
        // False position with Illinois damping, falling back to bisection
        // when the secant step degenerates.
        let denom = fhi - flo;
        let mut x = if denom.abs() > 1e-300 {
            (lo * (fhi - alpha) - hi * (flo - alpha)) / denom
        } else {
            0.5 * (lo + hi)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = tail(x)?;
        if (fx - alpha).abs() <= target_tol {
            return Ok(x);
        }
        if fx > alpha {
            lo = x;
            flo = fx;
            if side == 1 {
                fhi = alpha + 0.5 * (fhi - alpha);
            }
            side = 1;
        } else {
            hi = x;
            fhi = fx;
            if side == -1 {
                flo = alpha + 0.5 * (flo - alpha);
            }
            side = -1;
        }
        if hi - lo < 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    Err(Error::ToleranceNotMet(format!(
        "quantile iteration for {} did not reach |tail - {alpha}| <= {target_tol}",
        spec.label()
    )))
}
