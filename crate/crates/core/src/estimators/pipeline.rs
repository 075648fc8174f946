use std::sync::Arc;

use serde::Serialize;

use super::{
    bootstrap, compute, Assumption, BootstrapConfig, BootstrapSummary, Estimand, Estimate,
    Estimator, Method, SeSource,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::{cross_fit_with, CrossFitOptions, NuisanceFit, NuisanceModel};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub estimand: Estimand,
    pub assumption: Assumption,
    pub methods: Vec<Method>,
    pub crossfit: CrossFitOptions,
    /// Bootstrap replicates for estimators without a plug-in standard error; 0 skips it.
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            estimand: Estimand::Pn,
            assumption: Assumption::Monotonicity,
            methods: vec![Method::Proposed],
            crossfit: CrossFitOptions::default(),
            bootstrap: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRun {
    pub estimates: Vec<Estimate>,
    pub nuisance: NuisanceFit,
    pub bootstrap: Vec<BootstrapSummary>,
}

impl EstimateConfig {
    /// Estimators in the order of `methods`.
    pub fn estimators(&self, known_e: bool) -> Result<Vec<Estimator>> {
        self.methods
            .iter()
            .map(|m| match (m, self.estimand) {
                (Method::Proposed, est) => Ok(Estimator::proposed(est, self.assumption, known_e)),
                (Method::Ipw, Estimand::Pn) => Ok(Estimator::PnIpw),
                (Method::Or, Estimand::Pn) => Ok(Estimator::PnOr),
                (m, Estimand::Ps) => Err(Error::Argument(format!("no {m} estimator for PS"))),
            })
            .collect()
    }
}

/// Cross-fit once, compute every requested estimator, then bootstrap the ones
/// without a plug-in standard error. With LASSO nuisances the replicates reuse
/// the typical penalty selected in the main fit instead of rerunning the CV,
/// starting from the fold-averaged coefficients.
pub fn estimate(d: &Dataset, known_e: Option<&[f64]>, cfg: &EstimateConfig) -> Result<EstimateRun> {
    let estimators = cfg.estimators(known_e.is_some())?;
    let opts = CrossFitOptions {
        seed: cfg.seed,
        ..cfg.crossfit.clone()
    };
    let nf = cross_fit_with(d, &opts, known_e)?;
    let mut estimates = estimators
        .iter()
        .map(|&est| compute(est, d, &nf))
        .collect::<Result<Vec<_>>>()?;

    let pending: Vec<Estimator> = estimates
        .iter()
        .filter(|e| e.se.is_none())
        .map(|e| e.estimator)
        .collect();
    let mut summaries = Vec::new();
    if cfg.bootstrap > 0 && !pending.is_empty() {
        let model = match (&opts.model, nf.typical_lambdas()) {
            (NuisanceModel::Lasso(_), Some(lambda)) => NuisanceModel::LassoFixed {
                lambda,
                warm: nf.typical_coefficients().map(Arc::new),
            },
            (m, _) => m.clone(),
        };
        let bcfg = BootstrapConfig {
            replicates: cfg.bootstrap,
            crossfit: CrossFitOptions {
                model,
                ..opts.clone()
            },
            seed: cfg.seed,
            ..BootstrapConfig::default()
        };
        summaries = bootstrap(d, known_e, &pending, &bcfg)?;
        for s in &summaries {
            if let Some(e) = estimates.iter_mut().find(|e| e.estimator == s.estimator) {
                *e = e.clone().with_se(s.se, SeSource::Bootstrap);
            }
        }
    }
    Ok(EstimateRun {
        estimates,
        nuisance: nf,
        bootstrap: summaries,
    })
}
