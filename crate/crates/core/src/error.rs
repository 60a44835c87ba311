//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by sample validation, the scan statistics, the spectral
/// machinery, and the numerical inversion routines.
#[derive(Debug, Error)]
pub enum Error {
    /// The input contained NaN or infinite values.
    #[error("input contains {0} non-finite value(s)")]
    NonFinite(usize),

    /// Fewer observations than the statistic requires.
    #[error("sequence too short: need at least {required} observations, got {actual}")]
    TooShort { required: usize, actual: usize },

    /// Exact ties in the observations under the rejecting tie policy.
    #[error("{0} tied value(s) present; the statistics assume a continuous law (use jitter to break ties)")]
    TiesPresent(usize),

    /// Split index outside 1..=n-1.
    #[error("split index {c} out of range 1..={max}")]
    SplitOutOfRange { c: usize, max: usize },

    /// Sequence with zero variance.
    #[error("degenerate sample: zero variance")]
    DegenerateSample,

    /// Eigenvalue index must be >= 1.
    #[error("eigen index out of range: {0}")]
    IndexOutOfRange(String),

    /// Argument outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    DomainError(String),

    /// Adaptive integration could not certify the requested accuracy.
    #[error("tolerance not met: {0}")]
    ToleranceNotMet(String),

    /// A quadrature routine failed to converge.
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    /// The requested statistic/method pair has no implementation.
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    /// Monte Carlo replication count too small for the request.
    #[error("insufficient replications: {0}")]
    InsufficientReps(String),
}

pub type Result<T> = std::result::Result<T, Error>;
