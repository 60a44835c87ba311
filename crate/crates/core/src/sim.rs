//! Monte Carlo harness: null calibration, critical points, power tables,
//! and the change-point-estimator histogram.
//!
//! Every routine draws its replicates from counter-seeded ChaCha streams
//! (one stream per replicate index), so results are identical for a given
//! seed no matter how many threads execute the replicates, and the
//! reductions are plain counts or element-wise collections that do not
//! depend on completion order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::StatKind;
use crate::quadform::{imhof_tail, quantile, QuadFormSpec};
use crate::scan::{mean_change_values, scan_values};
use crate::spectrum::{truncate_spectrum, SpectrumKind};

/// One homogeneous stretch of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    /// Shape/scale parameterization.
    Gamma { shape: f64, scale: f64 },
    /// Normal with a standard-deviation parameter.
    NormalSd { mean: f64, sd: f64 },
    /// Normal with a variance parameter. Kept distinct from [`Segment::NormalSd`]
    /// so scenario files state explicitly which convention they use.
    NormalVar { mean: f64, variance: f64 },
    /// Exponential parameterized by its mean.
    Exponential { mean: f64 },
}

impl Segment {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Segment::Gamma { shape, scale } => shape > 0.0 && scale > 0.0,
            Segment::NormalSd { mean, sd } => mean.is_finite() && sd > 0.0,
            Segment::NormalVar { mean, variance } => mean.is_finite() && variance > 0.0,
            Segment::Exponential { mean } => mean > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DomainError(format!("invalid segment parameters: {self:?}")))
        }
    }

    fn sample_into(&self, out: &mut Vec<f64>, count: usize, rng: &mut ChaCha8Rng) {
        match *self {
            Segment::Gamma { shape, scale } => {
                let d = Gamma::new(shape, scale).expect("validated");
                out.extend((0..count).map(|_| d.sample(rng)));
            }
            Segment::NormalSd { mean, sd } => {
                let d = Normal::new(mean, sd).expect("validated");
                out.extend((0..count).map(|_| d.sample(rng)));
            }
            Segment::NormalVar { mean, variance } => {
                let d = Normal::new(mean, variance.sqrt()).expect("validated");
                out.extend((0..count).map(|_| d.sample(rng)));
            }
            Segment::Exponential { mean } => {
                let d = Exp::new(1.0 / mean).expect("validated");
                out.extend((0..count).map(|_| d.sample(rng)));
            }
        }
    }
}

/// A segment together with the fraction of the sequence it occupies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub dist: Segment,
    pub fraction: f64,
}

/// Families available for `1 + b/√n`-style parameter drifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftFamily {
    /// Gamma(shape = a + b/√n, scale 1) before the break, Gamma(a, 1) after.
    GammaShape,
    /// Normal(0, sd = a + b/√n) before the break, Normal(0, a) after.
    NormalSigma,
}

/// A contiguous-drift scenario: the first segment's parameter is
/// `a + b/√n`, the remainder's is `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub family: DriftFamily,
    pub a: f64,
    pub b: f64,
    pub break_fraction: f64,
}

/// A data-generating process for the power study: either an explicit list
/// of segments, or a drift specification whose parameters shrink with n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    #[serde(default)]
    pub segments: Vec<SegmentSpec>,
    #[serde(default)]
    pub drift: Option<DriftSpec>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        match (&self.drift, self.segments.is_empty()) {
            (Some(d), true) => {
                if !(d.break_fraction > 0.0 && d.break_fraction < 1.0) {
                    return Err(Error::DomainError(format!(
                        "drift break fraction must be in (0,1), got {}",
                        d.break_fraction
                    )));
                }
                if !(d.a.is_finite() && d.b.is_finite() && d.a > 0.0) {
                    return Err(Error::DomainError(format!(
                        "drift parameters must be finite with a > 0, got a={}, b={}",
                        d.a, d.b
                    )));
                }
                Ok(())
            }
            (Some(_), false) => Err(Error::DomainError(format!(
                "scenario '{}' must not mix explicit segments with a drift",
                self.label
            ))),
            (None, true) => Err(Error::DomainError(format!(
                "scenario '{}' has no segments",
                self.label
            ))),
            (None, false) => {
                let total: f64 = self.segments.iter().map(|s| s.fraction).sum();
                if self.segments.iter().any(|s| s.fraction <= 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::DomainError(format!(
                        "scenario '{}': fractions must be positive and sum to 1",
                        self.label
                    )));
                }
                for s in &self.segments {
                    s.dist.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Draws one sequence of length `n`; retries in the (measure-zero)
    /// event of a floating-point tie so downstream rank statistics are
    /// well defined.
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        loop {
            let mut values = Vec::with_capacity(n);
            match &self.drift {
                Some(d) => {
                    let c = segment_boundary(d.break_fraction, n);
                    let eps = d.b / (n as f64).sqrt();
                    let (first, second) = match d.family {
                        DriftFamily::GammaShape => (
                            Segment::Gamma { shape: d.a + eps, scale: 1.0 },
                            Segment::Gamma { shape: d.a, scale: 1.0 },
                        ),
                        DriftFamily::NormalSigma => (
                            Segment::NormalSd { mean: 0.0, sd: d.a + eps },
                            Segment::NormalSd { mean: 0.0, sd: d.a },
                        ),
                    };
                    first.sample_into(&mut values, c, rng);
                    second.sample_into(&mut values, n - c, rng);
                }
                None => {
                    let mut cum = 0.0;
                    let mut start = 0usize;
                    for (i, seg) in self.segments.iter().enumerate() {
                        cum += seg.fraction;
                        let end = if i + 1 == self.segments.len() {
                            n
                        } else {
                            segment_boundary(cum, n)
                        };
                        seg.dist.sample_into(&mut values, end.saturating_sub(start), rng);
                        start = end;
                    }
                }
            }
            if !has_ties(&values) {
                return values;
            }
        }
    }
}

fn segment_boundary(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

fn has_ties(values: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Splitmix64 step, used to derive independent sub-seeds from a base seed
/// and a tag path.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(base), |acc, &t| splitmix64(acc ^ t))
}

fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Draws an untied iid-uniform sequence (the null is distribution-free for
/// the rank statistics, so uniforms suffice).
fn null_uniform_sample(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        if !has_ties(&values) {
            return values;
        }
    }
}

fn null_normal_sample(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let values: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        if !has_ties(&values) {
            return values;
        }
    }
}

/// Null-calibration run: p-values that should be uniform, with their
/// distances from uniformity.
#[derive(Debug, Clone, Serialize)]
pub struct NullCalibration {
    pub n: usize,
    pub reps: u64,
    pub truncation: usize,
    pub seed: u64,
    /// Asymptotic p-values of the averaged statistic, sorted ascending;
    /// plot against `i/(reps+1)` for a Q-Q check.
    pub sorted_pvalues: Vec<f64>,
    /// Kolmogorov distance from the uniform law.
    pub ks_distance: f64,
    /// Anderson-Darling statistic against the uniform law.
    pub ad_statistic: f64,
}

/// Simulates `reps` null sequences of length `n` and returns their
/// asymptotic p-values with uniformity diagnostics.
pub fn null_calibration(n: usize, reps: u64, truncation: usize, seed: u64) -> Result<NullCalibration> {
    if n < 10 {
        return Err(Error::DomainError(format!("calibration needs n >= 10, got {n}")));
    }
    if reps < 100 {
        return Err(Error::InsufficientReps(format!(
            "calibration needs at least 100 replications, got {reps}"
        )));
    }
    let spec = QuadFormSpec::from_truncation(&truncate_spectrum(SpectrumKind::Wbar, truncation));
    let mut pvalues = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            let values = null_uniform_sample(n, &mut rng);
            let wbar = scan_values(&values).wbar;
            imhof_tail(&spec, wbar)
        })
        .collect::<Result<Vec<f64>>>()?;
    pvalues.sort_unstable_by(f64::total_cmp);

    let big_n = reps as f64;
    let mut ks: f64 = 0.0;
    for (i, &p) in pvalues.iter().enumerate() {
        let hi = (i + 1) as f64 / big_n - p;
        let lo = p - i as f64 / big_n;
        ks = ks.max(hi).max(lo);
    }
    let mut ad = -big_n;
    for (i, &p) in pvalues.iter().enumerate() {
        let a = p.clamp(1e-300, 1.0 - 1e-16).ln();
        let b = (1.0 - pvalues[pvalues.len() - 1 - i]).clamp(1e-300, 1.0).ln();
        ad -= (2 * i + 1) as f64 / big_n * (a + b);
    }

    Ok(NullCalibration {
        n,
        reps,
        truncation,
        seed,
        sorted_pvalues: pvalues,
        ks_distance: ks,
        ad_statistic: ad,
    })
}

/// Null statistics of one scan kind, simulated and sorted.
fn sorted_null_statistics(kind: StatKind, n: usize, reps: u64, seed: u64) -> Vec<f64> {
    let mut stats: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            match kind {
                StatKind::Wbar => scan_values(&null_uniform_sample(n, &mut rng)).wbar,
                StatKind::Wmax => scan_values(&null_uniform_sample(n, &mut rng)).wmax,
                StatKind::MeanChange => {
                    // Not distribution-free at finite n; the standard
                    // normal is the reference null here.
                    mean_change_values(&null_normal_sample(n, &mut rng))
                        .expect("continuous draws are nondegenerate")
                        .ts2
                }
            }
        })
        .collect();
    stats.sort_unstable_by(f64::total_cmp);
    stats
}

/// Upper-α critical point, estimated from `reps` simulated null statistics
/// as the order statistic of rank ⌈(1-α)(reps+1)⌉.
pub fn mc_critical_point(kind: StatKind, n: usize, alpha: f64, reps: u64, seed: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::DomainError(format!("alpha must be in (0,1), got {alpha}")));
    }
    if (reps as f64) * alpha < 50.0 {
        return Err(Error::InsufficientReps(format!(
            "need reps·alpha >= 50 for a stable critical point; got {reps}·{alpha}"
        )));
    }
    let stats = sorted_null_statistics(kind, n, reps, seed);
    Ok(order_statistic_upper(&stats, alpha))
}

fn order_statistic_upper(sorted: &[f64], alpha: f64) -> f64 {
    let reps = sorted.len();
    let rank = ((1.0 - alpha) * (reps as f64 + 1.0)).ceil() as usize;
    sorted[rank.clamp(1, reps) - 1]
}

/// Where a power-table cell gets its critical point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalSource {
    /// Simulated null quantile at the same n.
    Mc,
    /// Quantile of the limiting spectrum.
    Asymptotic,
}

/// One cell of a power table.
#[derive(Debug, Clone, Serialize)]
pub struct PowerRow {
    pub label: String,
    pub n: usize,
    pub alpha: f64,
    pub kind: StatKind,
    pub source: CriticalSource,
    pub critical: f64,
    pub rejection_rate: f64,
    pub reps: u64,
    pub se: f64,
}

/// Settings for [`power_table`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerTableConfig {
    /// Replications per cell.
    pub reps: u64,
    /// Replications behind each Monte Carlo critical point.
    pub crit_reps: u64,
    /// Spectrum truncation for asymptotic critical points.
    pub truncation: usize,
    pub seed: u64,
}

impl Default for PowerTableConfig {
    fn default() -> Self {
        Self {
            reps: 10_000,
            crit_reps: 20_000,
            truncation: crate::inference::DEFAULT_TRUNCATION,
            seed: 0,
        }
    }
}

const TAG_CRIT: u64 = 1;
const TAG_POWER: u64 = 2;

/// Simulates rejection rates for every scenario × n × kind × alpha cell.
///
/// Scan statistics for a given sample are computed once and reused across
/// kinds and levels; Monte Carlo critical points are shared across
/// scenarios (the null does not depend on the scenario).
pub fn power_table(
    scenarios: &[Scenario],
    n_list: &[usize],
    alphas: &[f64],
    kinds: &[StatKind],
    source: CriticalSource,
    cfg: &PowerTableConfig,
) -> Result<Vec<PowerRow>> {
    for s in scenarios {
        s.validate()?;
    }
    for &alpha in alphas {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::DomainError(format!("alpha must be in (0,1), got {alpha}")));
        }
    }
    if source == CriticalSource::Asymptotic && kinds.contains(&StatKind::Wmax) {
        return Err(Error::UnsupportedCombination(
            "no asymptotic critical points exist for the maximal statistic".into(),
        ));
    }

    // Critical points: by (kind, n, alpha) for MC, by (kind, alpha) for
    // asymptotic.
    let mut criticals: Vec<((StatKind, usize, usize), f64)> = Vec::new();
    for (ai, &alpha) in alphas.iter().enumerate() {
        for &kind in kinds {
            match source {
                CriticalSource::Asymptotic => {
                    let spec = match kind {
                        StatKind::Wbar => QuadFormSpec::from_truncation(&truncate_spectrum(
                            SpectrumKind::Wbar,
                            cfg.truncation,
                        )),
                        StatKind::MeanChange => QuadFormSpec::from_truncation(
                            &truncate_spectrum(SpectrumKind::AndersonDarling, cfg.truncation),
                        ),
                        StatKind::Wmax => unreachable!("rejected above"),
                    };
                    let crit = quantile(&spec, alpha)?;
                    for &n in n_list {
                        criticals.push(((kind, n, ai), crit));
                    }
                }
                CriticalSource::Mc => {
                    for &n in n_list {
                        let seed = derive_seed(cfg.seed, &[TAG_CRIT, kind_tag(kind), n as u64]);
                        let crit = mc_critical_point(kind, n, alpha, cfg.crit_reps, seed)?;
                        criticals.push(((kind, n, ai), crit));
                    }
                }
            }
        }
    }
    let critical_for = |kind: StatKind, n: usize, ai: usize| -> f64 {
        criticals
            .iter()
            .find(|(key, _)| *key == (kind, n, ai))
            .expect("critical points precomputed for every cell")
            .1
    };

    let needs_scan = kinds.iter().any(|k| matches!(k, StatKind::Wbar | StatKind::Wmax));
    let needs_mean = kinds.contains(&StatKind::MeanChange);

    let mut rows = Vec::new();
    for (si, scenario) in scenarios.iter().enumerate() {
        for &n in n_list {
            let seed = derive_seed(cfg.seed, &[TAG_POWER, si as u64, n as u64]);
            // (wbar, wmax, ts2) per replicate.
            let stats: Vec<(f64, f64, f64)> = (0..cfg.reps)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = replicate_rng(seed, rep);
                    let values = scenario.sample(n, &mut rng);
                    let (wbar, wmax) = if needs_scan {
                        let r = scan_values(&values);
                        (r.wbar, r.wmax)
                    } else {
                        (0.0, 0.0)
                    };
                    let ts2 = if needs_mean {
                        mean_change_values(&values)
                            .expect("continuous draws are nondegenerate")
                            .ts2
                    } else {
                        0.0
                    };
                    (wbar, wmax, ts2)
                })
                .collect();

            for &kind in kinds {
                for (ai, &alpha) in alphas.iter().enumerate() {
                    let crit = critical_for(kind, n, ai);
                    let exceed = stats
                        .iter()
                        .filter(|&&(wbar, wmax, ts2)| {
                            let stat = match kind {
                                StatKind::Wbar => wbar,
                                StatKind::Wmax => wmax,
                                StatKind::MeanChange => ts2,
                            };
                            stat > crit
                        })
                        .count();
                    let rate = exceed as f64 / cfg.reps as f64;
                    rows.push(PowerRow {
                        label: scenario.label.clone(),
                        n,
                        alpha,
                        kind,
                        source,
                        critical: crit,
                        rejection_rate: rate,
                        reps: cfg.reps,
                        se: (rate * (1.0 - rate) / cfg.reps as f64).sqrt(),
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn kind_tag(kind: StatKind) -> u64 {
    match kind {
        StatKind::Wbar => 10,
        StatKind::Wmax => 11,
        StatKind::MeanChange => 12,
    }
}

/// CSV rendering of power rows, one line per cell, with a header.
pub fn power_rows_to_csv(rows: &[PowerRow]) -> String {
    let mut out = String::from("label,n,alpha,statistic,critical_source,critical,rejection_rate,reps,se\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:.10},{:.6},{},{:.6}\n",
            r.label,
            r.n,
            r.alpha,
            r.kind.name(),
            match r.source {
                CriticalSource::Mc => "mc",
                CriticalSource::Asymptotic => "asymptotic",
            },
            r.critical,
            r.rejection_rate,
            r.reps,
            r.se
        ));
    }
    out
}

/// Histogram of the normalized change-point estimate under the null.
#[derive(Debug, Clone, Serialize)]
pub struct ChatHistogram {
    pub n: usize,
    pub reps: u64,
    pub seed: u64,
    /// Counts over equal-width bins of ĉ/n on [0, 1].
    pub bins: Vec<u64>,
    /// Replicates with ĉ/n ≤ 0.05.
    pub edge_left: u64,
    /// Replicates with ĉ/n ≥ 0.95.
    pub edge_right: u64,
}

impl ChatHistogram {
    /// Fraction of replicates in [0, 0.05] ∪ [0.95, 1].
    pub fn edge_mass(&self) -> f64 {
        (self.edge_left + self.edge_right) as f64 / self.reps as f64
    }
}

/// Simulates the maximizing split on null sequences and bins ĉ/n.
pub fn chat_histogram(n: usize, reps: u64, bins: usize, seed: u64) -> Result<ChatHistogram> {
    if n < 20 {
        return Err(Error::DomainError(format!("histogram needs n >= 20, got {n}")));
    }
    if bins == 0 {
        return Err(Error::DomainError("need at least one bin".into()));
    }
    let fractions: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            let values = null_uniform_sample(n, &mut rng);
            scan_values(&values).c_hat as f64 / n as f64
        })
        .collect();

    let mut histogram = vec![0u64; bins];
    let mut edge_left = 0;
    let mut edge_right = 0;
    for &f in &fractions {
        let idx = ((f * bins as f64) as usize).min(bins - 1);
        histogram[idx] += 1;
        if f <= 0.05 {
            edge_left += 1;
        }
        if f >= 0.95 {
            edge_right += 1;
        }
    }
    Ok(ChatHistogram { n, reps, seed, bins: histogram, edge_left, edge_right })
}
