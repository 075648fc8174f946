//! Nuisance models: propensity score `e(x)` and arm-specific outcome
//! regressions `mu_0(x)`, `mu_1(x)`, fitted out-of-fold.

mod crossfit;
mod lasso;
mod logistic;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

pub use crossfit::{cross_fit, cross_fit_with, fold_assignment, CrossFitOptions};
pub use lasso::{
    fit_lasso_at, fit_lasso_at_with, fit_lasso_from, fit_lasso_logistic, fit_lasso_logistic_with,
    lambda_max, LassoLogisticModel, LassoOptions,
};
pub use logistic::{
    expit, fit_logistic, fit_logistic_with, log_likelihood, logit, IrlsOptions, LogisticModel,
    DEFAULT_RIDGE,
};

use crate::error::{Error, Result};

pub const DEFAULT_CLIP: f64 = 1e-3;

/// Coordinate-descent tolerance for cross-fitted LASSO nuisances, looser than
/// the standalone fitters' default; predictions move far less than the
/// estimator's sampling error.
pub const NUISANCE_LASSO_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PropensitySource {
    Estimated,
    Known,
}

impl fmt::Display for PropensitySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PropensitySource::Estimated => "estimated",
            PropensitySource::Known => "known",
        })
    }
}

/// Which of the three nuisance regressions a message refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Propensity,
    Outcome0,
    Outcome1,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Propensity, Target::Outcome0, Target::Outcome1];

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NuisanceModel {
    Logistic {
        ridge: f64,
    },
    /// LASSO with lambda chosen by cross-validation inside every fit.
    Lasso(LassoOptions),
    /// LASSO at fixed penalties for (propensity, outcome0, outcome1), optionally
    /// started from given coefficients (original scale, intercept first).
    LassoFixed {
        lambda: [f64; 3],
        warm: Option<Arc<[Vec<f64>; 3]>>,
    },
}

impl NuisanceModel {
    pub fn logistic() -> Self {
        NuisanceModel::Logistic {
            ridge: DEFAULT_RIDGE,
        }
    }

    /// Cross-validated LASSO at [`NUISANCE_LASSO_TOL`].
    pub fn lasso() -> Self {
        NuisanceModel::Lasso(LassoOptions {
            tol: NUISANCE_LASSO_TOL,
            ..LassoOptions::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NuisanceWarning {
    /// The training complement of `fold` had no units in `arm`; the arm model was
    /// fitted on every unit of that arm instead.
    PooledArm {
        fold: usize,
        arm: u8,
    },
    /// Training targets were all equal; the constant was predicted.
    ConstantTarget {
        fold: usize,
        target: Target,
    },
    NotConverged {
        fold: usize,
        target: Target,
    },
}

impl fmt::Display for NuisanceWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NuisanceWarning::PooledArm { fold, arm } => {
                write!(
                    f,
                    "fold {fold}: no A={arm} units in training complement, pooled fit used"
                )
            }
            NuisanceWarning::ConstantTarget { fold, target } => {
                write!(
                    f,
                    "fold {fold}: constant target for {target:?}, constant prediction used"
                )
            }
            NuisanceWarning::NotConverged { fold, target } => {
                write!(
                    f,
                    "fold {fold}: {target:?} fit did not converge, last iterate used"
                )
            }
        }
    }
}

/// Per-unit cross-fitted nuisance predictions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuisanceFit {
    pub e_hat: Vec<f64>,
    pub mu0_hat: Vec<f64>,
    pub mu1_hat: Vec<f64>,
    pub propensity_source: PropensitySource,
    pub fold_id: Vec<usize>,
    pub warnings: Vec<NuisanceWarning>,
    /// Selected LASSO penalties per fold as (propensity, outcome0, outcome1); empty for logistic fits.
    pub lambdas: Vec<[f64; 3]>,
    /// Per-fold LASSO coefficients in the same layout; empty entries for constant targets.
    #[serde(skip)]
    pub lasso_coefficients: Vec<[Vec<f64>; 3]>,
}

impl NuisanceFit {
    /// Assembles a fit from given predictions (e.g. oracle nuisances in simulations).
    pub fn from_parts(
        e_hat: Vec<f64>,
        mu0_hat: Vec<f64>,
        mu1_hat: Vec<f64>,
        propensity_source: PropensitySource,
        fold_id: Vec<usize>,
    ) -> Self {
        NuisanceFit {
            e_hat,
            mu0_hat,
            mu1_hat,
            propensity_source,
            fold_id,
            warnings: Vec::new(),
            lambdas: Vec::new(),
            lasso_coefficients: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.e_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_hat.is_empty()
    }

    /// Checks lengths against `n` and that every prediction is finite.
    pub fn validate(&self, n: usize) -> Result<()> {
        let lens = [self.e_hat.len(), self.mu0_hat.len(), self.mu1_hat.len()];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Argument(format!(
                "nuisance fit has lengths {lens:?}, dataset has {n} rows"
            )));
        }
        let all = self.e_hat.iter().chain(&self.mu0_hat).chain(&self.mu1_hat);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite nuisance prediction".into()));
        }
        Ok(())
    }

    /// Same outcome predictions with the propensity replaced by known values.
    pub fn with_known_propensity(&self, e: &[f64]) -> Result<NuisanceFit> {
        check_known(e, self.len())?;
        Ok(NuisanceFit {
            e_hat: e.to_vec(),
            propensity_source: PropensitySource::Known,
            ..self.clone()
        })
    }

    /// Per-target mean of the per-fold LASSO coefficients. A target is left
    /// empty when no fold produced coefficients for it.
    pub fn typical_coefficients(&self) -> Option<[Vec<f64>; 3]> {
        if self.lasso_coefficients.is_empty() {
            return None;
        }
        let mut out: [Vec<f64>; 3] = Default::default();
        for t in Target::ALL {
            let fits: Vec<&Vec<f64>> = self
                .lasso_coefficients
                .iter()
                .map(|c| &c[t.index()])
                .filter(|c| !c.is_empty())
                .collect();
            if let Some(first) = fits.first() {
                let mut mean = vec![0.0; first.len()];
                for c in &fits {
                    for (m, v) in mean.iter_mut().zip(c.iter()) {
                        *m += v / fits.len() as f64;
                    }
                }
                out[t.index()] = mean;
            }
        }
        Some(out)
    }

    /// Geometric mean of the per-fold LASSO penalties, per target.
    pub fn typical_lambdas(&self) -> Option<[f64; 3]> {
        if self.lambdas.is_empty() {
            return None;
        }
        let mut out = [0.0; 3];
        for t in Target::ALL {
            let logs: Vec<f64> = self
                .lambdas
                .iter()
                .map(|l| l[t.index()])
                .filter(|v| v.is_finite() && *v > 0.0)
                .map(f64::ln)
                .collect();
            out[t.index()] = if logs.is_empty() {
                0.0
            } else {
                (logs.iter().sum::<f64>() / logs.len() as f64).exp()
            };
        }
        Some(out)
    }

    /// Audit export: `unit_id,fold_id,e_hat,mu0_hat,mu1_hat`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["unit_id", "fold_id", "e_hat", "mu0_hat", "mu1_hat"])?;
        for i in 0..self.len() {
            let fold = self.fold_id.get(i).copied().unwrap_or(0);
            w.write_record([
                i.to_string(),
                fold.to_string(),
                self.e_hat[i].to_string(),
                self.mu0_hat[i].to_string(),
                self.mu1_hat[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn check_known(e: &[f64], n: usize) -> Result<()> {
    if e.len() != n {
        return Err(Error::Argument(format!(
            "{} known propensities for {n} units",
            e.len()
        )));
    }
    if let Some(i) = e.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::Argument(format!(
            "known propensity {} at unit {} is outside (0, 1)",
            e[i],
            i + 1
        )));
    }
    Ok(())
}
