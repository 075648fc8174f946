use rayon::prelude::*;

use super::lasso::{fit_lasso_from, fit_lasso_logistic_with, LassoOptions};
use super::logistic::{fit_logistic_with, IrlsOptions, LogisticModel};
use super::{
    check_known, NuisanceFit, NuisanceModel, NuisanceWarning, PropensitySource, Target,
    DEFAULT_CLIP, NUISANCE_LASSO_TOL,
};
use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::rng::{shuffled_indices, stage, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct CrossFitOptions {
    pub folds: usize,
    pub model: NuisanceModel,
    /// Estimated propensities are clipped to `[clip, 1 - clip]`.
    pub clip: f64,
    pub seed: u64,
}

impl Default for CrossFitOptions {
    fn default() -> Self {
        CrossFitOptions {
            folds: 5,
            model: NuisanceModel::logistic(),
            clip: DEFAULT_CLIP,
            seed: 0,
        }
    }
}

/// Seeded shuffle, then round-robin: fold sizes differ by at most one and the
/// lowest fold ids receive the remainder.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = Stream::new(seed).child(stage::FOLDS).rng();
    let order = shuffled_indices(n, &mut rng);
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

pub fn cross_fit(
    d: &Dataset,
    k: usize,
    model: NuisanceModel,
    known_e: Option<&[f64]>,
    seed: u64,
) -> Result<NuisanceFit> {
    cross_fit_with(
        d,
        &CrossFitOptions {
            folds: k,
            model,
            seed,
            ..CrossFitOptions::default()
        },
        known_e,
    )
}

struct FoldOutput {
    idx: Vec<usize>,
    pred: [Vec<f64>; 3],
    lambdas: [f64; 3],
    coefficients: [Vec<f64>; 3],
    warnings: Vec<NuisanceWarning>,
}

/// Every unit's predictions come from models trained on the other folds. When
/// `known_e` is given the propensity model is not fitted and the supplied
/// values pass through unchanged.
pub fn cross_fit_with(
    d: &Dataset,
    opts: &CrossFitOptions,
    known_e: Option<&[f64]>,
) -> Result<NuisanceFit> {
    let n = d.n();
    let k = opts.folds;
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {k}")));
    }
    if n < 2 * k {
        return Err(Error::Argument(format!("need n >= 2k (n = {n}, k = {k})")));
    }
    if !(0.0..0.5).contains(&opts.clip) {
        return Err(Error::Argument(format!(
            "clip must lie in [0, 0.5), got {}",
            opts.clip
        )));
    }
    if let Some(e) = known_e {
        check_known(e, n)?;
    }
    for arm in [0u8, 1] {
        if !d.a().contains(&(arm as f64)) {
            return Err(Error::UnestimableArm { arm });
        }
    }

    let fold = fold_assignment(n, k, opts.seed);
    let root = Stream::new(opts.seed);
    let outputs: Vec<FoldOutput> = (0..k)
        .into_par_iter()
        .map(|f| fit_fold(d, &fold, f, opts, known_e.is_none(), &root))
        .collect::<Result<_>>()?;

    let mut e_hat = vec![0.0; n];
    let mut mu0_hat = vec![0.0; n];
    let mut mu1_hat = vec![0.0; n];
    let mut warnings = Vec::new();
    let mut lambdas = Vec::new();
    let mut coefficients = Vec::new();
    for out in outputs {
        for (j, &i) in out.idx.iter().enumerate() {
            e_hat[i] = out.pred[0][j];
            mu0_hat[i] = out.pred[1][j];
            mu1_hat[i] = out.pred[2][j];
        }
        warnings.extend(out.warnings);
        lambdas.push(out.lambdas);
        coefficients.push(out.coefficients);
    }
    let propensity_source = match known_e {
        Some(e) => {
            e_hat.copy_from_slice(e);
            PropensitySource::Known
        }
        None => {
            for v in &mut e_hat {
                *v = v.clamp(opts.clip, 1.0 - opts.clip);
            }
            PropensitySource::Estimated
        }
    };
    let is_lasso = !matches!(opts.model, NuisanceModel::Logistic { .. });
    Ok(NuisanceFit {
        e_hat,
        mu0_hat,
        mu1_hat,
        propensity_source,
        fold_id: fold,
        warnings,
        lambdas: if is_lasso { lambdas } else { Vec::new() },
        lasso_coefficients: if is_lasso { coefficients } else { Vec::new() },
    })
}

fn fit_fold(
    d: &Dataset,
    fold: &[usize],
    f: usize,
    opts: &CrossFitOptions,
    fit_e: bool,
    root: &Stream,
) -> Result<FoldOutput> {
    let n = d.n();
    let idx: Vec<usize> = (0..n).filter(|&i| fold[i] == f).collect();
    let train: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
    let x_test = d.x().select_rows(&idx);
    let mut warnings = Vec::new();
    let mut lambdas = [f64::NAN; 3];
    let mut coefficients: [Vec<f64>; 3] = Default::default();
    let mut pred: [Vec<f64>; 3] = Default::default();

    for target in Target::ALL {
        let rows: Vec<usize> = match target {
            Target::Propensity => {
                if !fit_e {
                    pred[0] = vec![0.5; idx.len()];
                    continue;
                }
                train.clone()
            }
            Target::Outcome0 | Target::Outcome1 => {
                let arm = if target == Target::Outcome0 { 0.0 } else { 1.0 };
                let in_arm: Vec<usize> =
                    train.iter().copied().filter(|&i| d.a()[i] == arm).collect();
                if in_arm.is_empty() {
                    warnings.push(NuisanceWarning::PooledArm {
                        fold: f,
                        arm: arm as u8,
                    });
                    (0..n).filter(|&i| d.a()[i] == arm).collect()
                } else {
                    in_arm
                }
            }
        };
        let t: Vec<f64> = rows
            .iter()
            .map(|&i| {
                if target == Target::Propensity {
                    d.a()[i]
                } else {
                    d.y()[i]
                }
            })
            .collect();
        let x_train = d.x().select_rows(&rows);
        let seed = root.path(&[stage::LASSO_CV, f as u64, target as u64]).key();
        let fit = fit_predict(&opts.model, &x_train, &t, &x_test, target, seed)?;
        if let Some(w) = fit.warn {
            warnings.push(match w {
                Warn::Constant => NuisanceWarning::ConstantTarget { fold: f, target },
                Warn::NotConverged => NuisanceWarning::NotConverged { fold: f, target },
            });
        }
        lambdas[target as usize] = fit.lambda;
        coefficients[target as usize] = fit.coefficients;
        pred[target as usize] = fit.pred;
    }
    Ok(FoldOutput {
        idx,
        pred,
        lambdas,
        coefficients,
        warnings,
    })
}

enum Warn {
    Constant,
    NotConverged,
}

struct Fitted {
    pred: Vec<f64>,
    lambda: f64,
    /// LASSO coefficients; empty otherwise.
    coefficients: Vec<f64>,
    warn: Option<Warn>,
}

impl Fitted {
    fn plain(pred: Vec<f64>, warn: Option<Warn>) -> Self {
        Fitted {
            pred,
            lambda: f64::NAN,
            coefficients: Vec::new(),
            warn,
        }
    }
}

fn fit_predict(
    model: &NuisanceModel,
    x: &Matrix,
    t: &[f64],
    x_test: &Matrix,
    target: Target,
    seed: u64,
) -> Result<Fitted> {
    let tbar = t.iter().sum::<f64>() / t.len() as f64;
    if tbar == 0.0 || tbar == 1.0 {
        return Ok(Fitted::plain(
            vec![tbar; x_test.nrows()],
            Some(Warn::Constant),
        ));
    }
    match model {
        NuisanceModel::Logistic { ridge } => {
            let opts = IrlsOptions {
                ridge: *ridge,
                ..IrlsOptions::default()
            };
            match fit_logistic_with(x, t, &opts) {
                Ok(m) => Ok(Fitted::plain(m.predict(x_test), None)),
                Err(Error::Diverged { coefficients, .. }) => {
                    let m = LogisticModel {
                        coefficients,
                        converged: false,
                        iterations: opts.max_iter,
                        final_log_likelihood: f64::NAN,
                    };
                    Ok(Fitted::plain(m.predict(x_test), Some(Warn::NotConverged)))
                }
                Err(e) => Err(e),
            }
        }
        NuisanceModel::Lasso(o) => {
            let opts = LassoOptions {
                seed,
                cv_folds: o.cv_folds.min(t.len()).max(2),
                ..*o
            };
            let m = fit_lasso_logistic_with(x, t, &opts)?;
            Ok(Fitted {
                pred: m.predict(x_test),
                lambda: m.lambda,
                coefficients: m.coefficients,
                warn: None,
            })
        }
        NuisanceModel::LassoFixed { lambda, warm } => {
            let lam = lambda[target as usize];
            let init = warm
                .as_ref()
                .map(|w| w[target as usize].as_slice())
                .filter(|c| !c.is_empty());
            let m = fit_lasso_from(x, t, lam, NUISANCE_LASSO_TOL, init)?;
            Ok(Fitted {
                pred: m.predict(x_test),
                lambda: lam,
                coefficients: m.coefficients,
                warn: None,
            })
        }
    }
}
