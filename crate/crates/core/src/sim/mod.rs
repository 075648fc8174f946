//! Simulation designs, Monte-Carlo truths and the replication engine.

mod dgp;
pub mod interstroke;
mod study;
mod truth;

pub use dgp::{
    case8_two_dim, generate_case, generate_from, registry, CaseSample, DgpSpec, Index,
    NuisanceTruth, PotentialOutcome, Term, TrueNuisances, CASES,
};
pub use study::{
    metrics_to_csv, read_metrics_csv, render_report, run_study, write_metrics_csv, MetricsRow,
    StudyConfig, MAX_FAILURE_RATE, METRICS_HEADER,
};
pub use truth::{
    cache_dir, true_value, true_value_cached, true_value_detail, TruthDetail, DEFAULT_TRUTH_SAMPLES,
};
