//! Estimators and statistical diagnostics built on replica runs.

pub mod coupling;
pub mod gof;
pub mod speed;
pub mod summary;
pub mod sweep;

pub use coupling::{coupling_experiment, CouplingReport};
pub use gof::{
    chi_square_fit, cramer_rate_pm1, exponential_cdf, geometric_fit, ks_one_sample,
    ks_two_sample, linear_fit, std_normal_cdf, ChiSquareReport, KsReport,
};
pub use speed::{
    batch_means_sigma, clt_diagnostic, estimate_regen, estimate_speed_lln,
    estimate_speed_subadditive, ldp_decay, sample_walk, speed_from_records,
    subadditive_triple, walk_end_record, CltReport, ExperimentError, InitialMode, LdpPoint,
    LdpReport, RegenEstimate, RegenRecord, RegenRunConfig, SigmaEstimate, SpeedEstimate,
    SubadditiveSpeed, SubadditiveTriple, WalkEndRecord,
};
pub use summary::{agree_within, pearson_correlation, ratio_estimate, summarize, Summary, Z95};
pub use sweep::{sweep, SweepConfig, SweepPoint, SweepResult};
