//! P-values and test reports for the scan statistics.
//!
//! The averaged statistic and the mean-change statistic have computable
//! limit laws (the product spectrum and the Anderson-Darling spectrum), so
//! they get asymptotic p-values by tail inversion. The maximal statistic
//! has no implemented asymptotic law; it is calibrated by permutation, as
//! can the other two when n is small. All three statistics are invariant
//! under permutation-recomputation because the null hypothesis makes the
//! sequence exchangeable.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadform::{imhof_tail, QuadFormSpec};
use crate::sample::Sample;
use crate::scan::{self, mean_change_values, scan_values};
use crate::spectrum::{truncate_spectrum, SpectrumKind};

/// Which scan statistic a test is based on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    /// Average of the per-split two-sample statistics.
    Wbar,
    /// Maximum of the per-split two-sample statistics.
    Wmax,
    /// Variance-studentized average of squared per-split Z statistics.
    MeanChange,
}

impl StatKind {
    pub fn name(self) -> &'static str {
        match self {
            StatKind::Wbar => "wbar",
            StatKind::Wmax => "wmax",
            StatKind::MeanChange => "mean_change",
        }
    }
}

/// How the p-value is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Asymptotic,
    Permutation,
}

/// Settings for [`run_test`].
#[derive(Debug, Clone, Copy)]
pub struct TestConfig {
    /// Spectrum truncation size for asymptotic p-values.
    pub truncation: usize,
    /// Permutation replications.
    pub reps: u64,
    /// Seed for the permutation stream.
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self { truncation: DEFAULT_TRUNCATION, reps: DEFAULT_REPS, seed: 0 }
    }
}

/// Default spectrum truncation size; drives the neglected-tail mean below
/// 2e-3 for the product spectrum, enough for three-decimal p-values.
pub const DEFAULT_TRUNCATION: usize = 200;

/// Default permutation replication count.
pub const DEFAULT_REPS: u64 = 9999;

/// Outcome of a test, with enough provenance to reproduce it.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub statistic_kind: StatKind,
    pub observed: f64,
    pub p_value: f64,
    pub method: Method,
    /// Maximizing split (smallest, 1-based), for the scan statistics.
    pub c_hat: Option<usize>,
    /// True when the maximizing split is not unique.
    pub c_hat_tied: Option<bool>,
    pub n: usize,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
    pub truncation: Option<usize>,
}

/// Asymptotic p-value for an observed average statistic: the upper tail of
/// the truncated product spectrum, with the neglected terms entering
/// through their mean.
pub fn wbar_asymptotic_pvalue(wbar_observed: f64, truncation: usize) -> Result<f64> {
    if !(wbar_observed >= 0.0) {
        return Err(Error::DomainError(format!(
            "observed statistic must be nonnegative, got {wbar_observed}"
        )));
    }
    let spec = QuadFormSpec::from_truncation(&truncate_spectrum(SpectrumKind::Wbar, truncation));
    imhof_tail(&spec, wbar_observed)
}

/// Asymptotic p-value for the studentized mean-change statistic via the
/// Anderson-Darling spectrum.
pub fn mean_change_asymptotic_pvalue(ts2_observed: f64, truncation: usize) -> Result<f64> {
    if !(ts2_observed >= 0.0) {
        return Err(Error::DomainError(format!(
            "observed statistic must be nonnegative, got {ts2_observed}"
        )));
    }
    let spec = QuadFormSpec::from_truncation(&truncate_spectrum(
        SpectrumKind::AndersonDarling,
        truncation,
    ));
    imhof_tail(&spec, ts2_observed)
}

fn observed_statistic(values: &[f64], kind: StatKind) -> Result<f64> {
    Ok(match kind {
        StatKind::Wbar => scan_values(values).wbar,
        StatKind::Wmax => scan_values(values).wmax,
        StatKind::MeanChange => mean_change_values(values)?.ts2,
    })
}

/// Permutation p-value with the add-one rule: `(1 + #{perm ≥ obs}) / (reps + 1)`.
///
/// Each replicate shuffles the sequence with its own counter-seeded stream,
/// so the result is identical for a given seed regardless of how replicates
/// are scheduled.
pub fn permutation_pvalue(
    sample: &Sample,
    kind: StatKind,
    reps: u64,
    seed: u64,
) -> Result<TestReport> {
    if reps < 99 {
        return Err(Error::InsufficientReps(format!(
            "permutation test needs at least 99 replications, got {reps}"
        )));
    }
    let observed = observed_statistic(sample.values(), kind)?;

    let exceed: u64 = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep);
            let mut permuted = sample.values().to_vec();
            permuted.shuffle(&mut rng);
            let stat = observed_statistic(&permuted, kind)
                .expect("permuting cannot degrade a valid sample");
            u64::from(stat >= observed)
        })
        .sum();

    let p_value = (1 + exceed) as f64 / (reps + 1) as f64;
    let (c_hat, c_hat_tied) = scan_location(sample, kind);
    Ok(TestReport {
        statistic_kind: kind,
        observed,
        p_value,
        method: Method::Permutation,
        c_hat,
        c_hat_tied,
        n: sample.n(),
        reps: Some(reps),
        seed: Some(seed),
        truncation: None,
    })
}

fn scan_location(sample: &Sample, kind: StatKind) -> (Option<usize>, Option<bool>) {
    match kind {
        StatKind::Wbar | StatKind::Wmax => {
            let r = scan::scan(sample);
            (Some(r.c_hat), Some(r.c_hat_tied))
        }
        StatKind::MeanChange => (None, None),
    }
}

/// Runs a test and assembles the report.
///
/// The maximal statistic has no asymptotic law here, so `(Wmax, Asymptotic)`
/// is rejected as an unsupported combination.
pub fn run_test(
    sample: &Sample,
    kind: StatKind,
    method: Method,
    config: &TestConfig,
) -> Result<TestReport> {
    match method {
        Method::Permutation => permutation_pvalue(sample, kind, config.reps, config.seed),
        Method::Asymptotic => {
            let (observed, p_value) = match kind {
                StatKind::Wmax => {
                    return Err(Error::UnsupportedCombination(
                        "no asymptotic law is implemented for the maximal statistic; use the permutation method".into(),
                    ))
                }
                StatKind::Wbar => {
                    let obs = scan::scan(sample).wbar;
                    (obs, wbar_asymptotic_pvalue(obs, config.truncation)?)
                }
                StatKind::MeanChange => {
                    let obs = scan::mean_change_scan(sample)?.ts2;
                    (obs, mean_change_asymptotic_pvalue(obs, config.truncation)?)
                }
            };
            let (c_hat, c_hat_tied) = scan_location(sample, kind);
            Ok(TestReport {
                statistic_kind: kind,
                observed,
                p_value,
                method: Method::Asymptotic,
                c_hat,
                c_hat_tied,
                n: sample.n(),
                reps: None,
                seed: None,
                truncation: Some(config.truncation),
            })
        }
    }
}
