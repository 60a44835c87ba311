//! Tests for a single distributional change point in an independent
//! sequence, built on per-split two-sample Cramér-von Mises statistics.
//!
//! The scan computes the two-sample statistic at every possible split and
//! aggregates it two ways: the average over splits, whose limit law is a
//! weighted sum of chi-squares with explicitly known weights and therefore
//! admits fast, asymptotically exact p-values, and the maximum over splits,
//! which doubles as a change-point estimator but needs resampling for
//! calibration. A mean-change variant of the same averaging idea (squared
//! per-split Z statistics, Anderson-Darling limit) is included, along with
//! asymptotic power computations under contiguous alternatives and a Monte
//! Carlo harness for null calibration, power tables, and estimator
//! diagnostics.

pub mod error;
pub mod inference;
pub mod normal;
pub mod power;
pub mod quad;
pub mod quadform;
pub mod sample;
pub mod scan;
pub mod sim;
pub mod spectrum;

pub use error::{Error, Result};
pub use inference::{
    mean_change_asymptotic_pvalue, permutation_pvalue, run_test, wbar_asymptotic_pvalue, Method,
    StatKind, TestConfig, TestReport,
};
pub use power::{
    asymptotic_power, drift_expansion, mu_chi, mu_psi, ContiguousAlternative, DriftExpansion,
    PowerOptions,
};
pub use quadform::{imhof_tail, mc_tail, quantile, QuadFormSpec};
pub use sample::{Sample, TiePolicy};
pub use scan::{mean_change_scan, scan, two_sample_cvm, MeanChangeResult, ScanResult};
pub use sim::{
    chat_histogram, mc_critical_point, null_calibration, power_table, ChatHistogram,
    CriticalSource, DriftFamily, DriftSpec, NullCalibration, PowerRow, PowerTableConfig, Scenario,
    Segment, SegmentSpec,
};
pub use spectrum::{
    chi_eigenfunction, kernel, lambda, psi_eigenfunction, truncate_spectrum, EigenIndex,
    KernelKind, SpectrumKind, SpectrumTruncation,
};
