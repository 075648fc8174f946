use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{point_estimate, Estimator};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::{cross_fit_with, CrossFitOptions};
use crate::rng::{stage, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    /// Nuisance refit applied to every resample. Its seed is replaced per replicate.
    pub crossfit: CrossFitOptions,
    pub seed: u64,
    /// Fewer successful replicates than this fraction of `replicates` is an error.
    pub min_success_fraction: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 200,
            crossfit: CrossFitOptions::default(),
            seed: 0,
            min_success_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub estimator: Estimator,
    /// Standard deviation (n - 1 divisor) of the successful replicate estimates.
    pub se: f64,
    pub successes: usize,
    pub requested: usize,
}

/// Nonparametric bootstrap: resample rows with replacement, refit the
/// nuisances, recompute every estimator. One cross-fit per replicate is shared
/// by all estimators. When `known_e` is given the propensity is not refitted:
/// every replicate uses the resampled known values.
pub fn bootstrap(
    d: &Dataset,
    known_e: Option<&[f64]>,
    estimators: &[Estimator],
    cfg: &BootstrapConfig,
) -> Result<Vec<BootstrapSummary>> {
    if cfg.replicates < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 bootstrap replicates, got {}",
            cfg.replicates
        )));
    }
    if estimators.iter().any(|e| e.requires_known_e()) && known_e.is_none() {
        return Err(Error::WrongVariant(
            "known-propensity estimator requested without known propensities".into(),
        ));
    }
    let n = d.n();
    let root = Stream::new(cfg.seed).child(stage::BOOTSTRAP);

    let draws: Vec<Vec<Option<f64>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let s = root.child(r as u64);
            let mut rng = s.rng();
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let db = d.select_rows(&idx);
            let eb: Option<Vec<f64>> = known_e.map(|e| idx.iter().map(|&i| e[i]).collect());
            let opts = CrossFitOptions {
                seed: s.key(),
                ..cfg.crossfit.clone()
            };
            let Ok(fit) = cross_fit_with(&db, &opts, eb.as_deref()) else {
                return vec![None; estimators.len()];
            };
            estimators
                .iter()
                .map(|&est| point_estimate(est, &db, &fit).ok().map(|e| e.value))
                .collect()
        })
        .collect();

    let min_success = (cfg.min_success_fraction * cfg.replicates as f64)
        .ceil()
        .max(2.0) as usize;
    estimators
        .iter()
        .enumerate()
        .map(|(j, &est)| {
            let vals: Vec<f64> = draws.iter().filter_map(|row| row[j]).collect();
            if vals.len() < min_success {
                return Err(Error::InsufficientBootstrap {
                    successes: vals.len(),
                    requested: cfg.replicates,
                });
            }
            let m = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / m;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            Ok(BootstrapSummary {
                estimator: est,
                se: var.sqrt(),
                successes: vals.len(),
                requested: cfg.replicates,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_case, registry};

    fn sample(n: usize) -> (Dataset, Vec<f64>) {
        let g = generate_case(&registry(1).unwrap(), n, 7).unwrap();
        let e = g.truth.e.clone();
        (g.dataset, e)
    }

    #[test]
    fn deterministic_and_positive() {
        let (d, e) = sample(400);
        let cfg = BootstrapConfig {
            replicates: 20,
            seed: 3,
            ..BootstrapConfig::default()
        };
        let ests = [Estimator::PnIpw, Estimator::PnOr, Estimator::PsMonoKnownE];
        let a = bootstrap(&d, Some(&e), &ests, &cfg).unwrap();
        let b = bootstrap(&d, Some(&e), &ests, &cfg).unwrap();
        assert_eq!(a, b);
        for s in &a {
            assert!(s.se > 0.0 && s.se.is_finite());
            assert_eq!(s.successes, 20);
        }
    }

    #[test]
    fn known_estimator_without_known_e() {
        let (d, _) = sample(100);
        let r = bootstrap(
            &d,
            None,
            &[Estimator::PsMonoKnownE],
            &BootstrapConfig::default(),
        );
        assert!(matches!(r, Err(Error::WrongVariant(_))));
    }

    #[test]
    fn insufficient_successes() {
        // no treated cases in any resample: PN IPW always fails
        let x = crate::data::Matrix::zeros(20, 0);
        let a: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
        let y: Vec<f64> = (0..20)
            .map(|i| {
                if i % 2 == 0 {
                    (i % 4 == 0) as u8 as f64
                } else {
                    0.0
                }
            })
            .collect();
        let d = Dataset::new(x, a, y).unwrap();
        let cfg = BootstrapConfig {
            replicates: 10,
            ..BootstrapConfig::default()
        };
        let r = bootstrap(&d, None, &[Estimator::PnIpw], &cfg);
        assert!(matches!(
            r,
            Err(Error::InsufficientBootstrap {
                successes: 0,
                requested: 10
            })
        ));
    }
}
