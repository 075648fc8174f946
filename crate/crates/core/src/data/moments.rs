use serde::Serialize;

use crate::nuisance::NuisanceFit;

/// Sample-average functionals of the nuisance predictions.
///
/// `mu0`/`mu1` average `e*mu_a`, the `bar_*` fields weight by `1-e` instead,
/// and `barbar_*` average `(1-mu_a)(1-e)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentFunctionals {
    pub mu0: f64,
    pub mu1: f64,
    pub mu: f64,
    pub bar_mu0: f64,
    pub bar_mu1: f64,
    pub bar_mu: f64,
    pub barbar_mu0: f64,
    pub barbar_mu1: f64,
}

pub fn moment_functionals(nf: &NuisanceFit) -> MomentFunctionals {
    let n = nf.len() as f64;
    let mut m = [0.0f64; 8];
    for ((&e, &m0), &m1) in nf.e_hat.iter().zip(&nf.mu0_hat).zip(&nf.mu1_hat) {
        let c = 1.0 - e;
        m[0] += e * m0;
        m[1] += e * m1;
        m[2] += e * m0 * m1;
        m[3] += m0 * c;
        m[4] += m1 * c;
        m[5] += m1 * m0 * c;
        m[6] += (1.0 - m0) * c;
        m[7] += (1.0 - m1) * c;
    }
    MomentFunctionals {
        mu0: m[0] / n,
        mu1: m[1] / n,
        mu: m[2] / n,
        bar_mu0: m[3] / n,
        bar_mu1: m[4] / n,
        bar_mu: m[5] / n,
        barbar_mu0: m[6] / n,
        barbar_mu1: m[7] / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuisance::PropensitySource;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn nf(e: Vec<f64>, m0: Vec<f64>, m1: Vec<f64>) -> NuisanceFit {
        let n = e.len();
        NuisanceFit::from_parts(e, m0, m1, PropensitySource::Estimated, vec![0; n])
    }

    #[test]
    fn constant_predictions() {
        let m = moment_functionals(&nf(vec![0.5; 4], vec![0.2; 4], vec![0.6; 4]));
        assert_abs_diff_eq!(m.mu0, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mu1, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mu, 0.06, epsilon = 1e-15);
        assert_abs_diff_eq!(m.bar_mu0, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(m.bar_mu1, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(m.barbar_mu0, 0.4, epsilon = 1e-15);
    }

    #[test]
    fn unit_propensity_zeroes_bar_fields() {
        let m = moment_functionals(&nf(vec![1.0; 3], vec![0.2, 0.5, 0.9], vec![0.6, 0.1, 0.3]));
        for v in [m.bar_mu0, m.bar_mu1, m.bar_mu, m.barbar_mu0, m.barbar_mu1] {
            assert_eq!(v, 0.0);
        }
    }

    proptest! {
        #[test]
        fn matches_columnwise_recomputation(
            rows in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), 1..30)
        ) {
            let e: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let m0: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let m1: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let m = moment_functionals(&nf(e.clone(), m0.clone(), m1.clone()));
            let mean = |f: &dyn Fn(usize) -> f64| (0..e.len()).map(f).sum::<f64>() / e.len() as f64;
            prop_assert!((m.mu0 - mean(&|i| e[i] * m0[i])).abs() < 1e-12);
            prop_assert!((m.mu1 - mean(&|i| e[i] * m1[i])).abs() < 1e-12);
            prop_assert!((m.mu - mean(&|i| e[i] * m0[i] * m1[i])).abs() < 1e-12);
            prop_assert!((m.bar_mu - mean(&|i| (1.0 - e[i]) * m0[i] * m1[i])).abs() < 1e-12);
            prop_assert!((m.barbar_mu1 - mean(&|i| (1.0 - e[i]) * (1.0 - m1[i]))).abs() < 1e-12);
            for v in [m.mu0, m.mu1, m.mu, m.bar_mu0, m.bar_mu1, m.bar_mu, m.barbar_mu0, m.barbar_mu1] {
                prop_assert!((-1e-15..=1.0 + 1e-15).contains(&v));
            }
            prop_assert!(m.mu <= m.mu0.min(m.mu1) + 1e-15);
        }
    }
}
