//! Estimation of the probability of necessary causation (PN) and the
//! probability of sufficient causation (PS) from observational data with a
//! binary cause and a binary outcome.
//!
//! The pipeline is: load a [`Dataset`], cross-fit the nuisance regressions
//! with [`cross_fit`], then pass both to an estimator such as [`pn_mono`].
//! [`estimate`] does all of that in one call and adds bootstrap standard
//! errors where no plug-in form exists.

// `!(x > tol)` is used on purpose so NaN lands in the error branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod efficiency;
pub mod error;
pub mod estimators;
pub mod nuisance;
pub mod rng;
pub mod sim;

pub use data::{
    csv_header, expand_interactions, load_csv, load_csv_with, write_csv, CsvColumns, CsvLoad,
    Dataset, Matrix,
};
pub use data::{moment_functionals, MomentFunctionals};
pub use efficiency::{efficiency_report, efficiency_report_at, EfficiencyReport};
pub use error::{Error, Result};
pub use estimators::{
    bootstrap, compute, estimate, influence_values, pn_inde, pn_inde_known_e, pn_influence_values,
    pn_ipw, pn_mono, pn_mono_known_e, pn_or, point_estimate, ps_inde, ps_inde_known_e,
    ps_influence_values, ps_mono, ps_mono_known_e, Assumption, BootstrapConfig, BootstrapSummary,
    Estimand, Estimate, EstimateConfig, EstimateRun, EstimateWarning, Estimator, InfluenceValues,
    Method, SeSource, Z95,
};
pub use nuisance::{
    cross_fit, cross_fit_with, fit_lasso_logistic, fit_logistic, CrossFitOptions, NuisanceFit,
    NuisanceModel, NuisanceWarning, PropensitySource,
};
pub use sim::{generate_case, registry, run_study, true_value, DgpSpec, MetricsRow, StudyConfig};
