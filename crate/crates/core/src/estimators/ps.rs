use super::{
    compute, influence_values, Assumption, Estimand, Estimate, Estimator, InfluenceValues, Unit,
};
use crate::data::Dataset;
use crate::error::Result;
use crate::nuisance::NuisanceFit;

pub(super) fn unit_terms(est: Estimator, u: &Unit) -> (f64, f64) {
    let Unit { a, y, e, m0, m1 } = *u;
    // treated residual reweighted to the untreated: A(1-e)/e * (Y - mu1)
    let trt = a / e * (1.0 - e) * (y - m1);
    match est {
        // the denominator is negative by construction: -(share of control non-cases)
        Estimator::PsMono => ((1.0 - a) * y - trt + m1 * (a - 1.0), (1.0 - a) * (y - 1.0)),
        Estimator::PsInde => (
            m1 * (1.0 - y) * (a - 1.0) - trt * (1.0 - m0),
            (1.0 - y) * (a - 1.0),
        ),
        Estimator::PsMonoKnownE => (
            trt - (1.0 - a) * (y - m0) + (m1 - m0) * (1.0 - e),
            (1.0 - m0) * (1.0 - e) - (1.0 - a) * (y - m0),
        ),
        Estimator::PsIndeKnownE => (
            trt * (1.0 - m0) - (1.0 - a) * (y - m0) * m1 + m1 * (1.0 - m0) * (1.0 - e),
            (1.0 - m0) * (1.0 - e) - (1.0 - a) * (y - m0),
        ),
        _ => unreachable!("{est} is not a PS estimator"),
    }
}

pub fn ps_mono(d: &Dataset, nf: &NuisanceFit) -> Result<Estimate> {
    compute(Estimator::PsMono, d, nf)
}

pub fn ps_inde(d: &Dataset, nf: &NuisanceFit) -> Result<Estimate> {
    compute(Estimator::PsInde, d, nf)
}

/// Point estimate only; the standard error comes from [`super::bootstrap`].
pub fn ps_mono_known_e(d: &Dataset, nf: &NuisanceFit) -> Result<Estimate> {
    compute(Estimator::PsMonoKnownE, d, nf)
}

/// Point estimate only; the standard error comes from [`super::bootstrap`].
pub fn ps_inde_known_e(d: &Dataset, nf: &NuisanceFit) -> Result<Estimate> {
    compute(Estimator::PsIndeKnownE, d, nf)
}

pub fn ps_influence_values(
    d: &Dataset,
    nf: &NuisanceFit,
    gamma_hat: f64,
    assumption: Assumption,
) -> Result<InfluenceValues> {
    influence_values(
        Estimator::proposed(Estimand::Ps, assumption, false),
        d,
        nf,
        gamma_hat,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;
    use crate::error::Error;
    use crate::nuisance::PropensitySource;
    use approx::assert_abs_diff_eq;

    fn ds(a: &[f64], y: &[f64]) -> Dataset {
        Dataset::new(Matrix::zeros(a.len(), 0), a.to_vec(), y.to_vec()).unwrap()
    }

    fn nf(e: &[f64], m0: &[f64], m1: &[f64], src: PropensitySource) -> NuisanceFit {
        NuisanceFit::from_parts(e.to_vec(), m0.to_vec(), m1.to_vec(), src, vec![0; e.len()])
    }

    const EST: PropensitySource = PropensitySource::Estimated;
    const KNOWN: PropensitySource = PropensitySource::Known;

    #[test]
    fn mono_certain_sufficiency() {
        let d = ds(&[1.0, 1.0, 0.0, 0.0], &[1.0, 1.0, 0.0, 0.0]);
        let r = ps_mono(&d, &nf(&[0.5; 4], &[0.3; 4], &[1.0; 4], EST)).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mono_hand_arithmetic() {
        // numerator -0.3, denominator -2 (both over n = 3)
        let d = ds(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]);
        let r = ps_mono(&d, &nf(&[0.5; 3], &[0.2; 3], &[0.6, 0.5, 0.4], EST)).unwrap();
        assert_abs_diff_eq!(r.value, 0.15, epsilon = 1e-12);
    }

    #[test]
    fn mono_equal_outcome_models_reduce_to_control_mean() {
        // treated residuals zero, no control events: numerator keeps -mu1 on controls only
        let d = ds(&[1.0, 1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0, 0.0]);
        let m = [1.0, 0.0, 0.3, 0.5, 0.7];
        let r = ps_mono(&d, &nf(&[0.4; 5], &m, &m, EST)).unwrap();
        assert_abs_diff_eq!(r.value, (0.3 + 0.5 + 0.7) / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn denominator_sign() {
        let d = ds(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]);
        let f = nf(&[0.5; 4], &[0.2; 4], &[0.6; 4], EST);
        let (_, den) = Estimator::PsMono.terms(&d, &f);
        let mean = den.iter().sum::<f64>() / 4.0;
        assert_abs_diff_eq!(mean, -(d.control_noncases() as f64) / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn no_control_noncases() {
        let d = ds(&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]);
        let f = nf(&[0.5; 3], &[0.2; 3], &[0.6; 3], EST);
        assert!(matches!(
            ps_mono(&d, &f),
            Err(Error::DegenerateDenominator(_))
        ));
        assert!(matches!(
            ps_inde(&d, &f),
            Err(Error::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn inde_cases() {
        let d = ds(&[1.0, 0.0, 0.0], &[1.0, 0.0, 1.0]);
        let r = ps_inde(&d, &nf(&[0.5; 3], &[0.2; 3], &[1.0; 3], EST)).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-15);
        let d = ds(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]);
        let r = ps_inde(&d, &nf(&[0.5; 3], &[0.2; 3], &[0.0; 3], EST)).unwrap();
        assert_abs_diff_eq!(r.value, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn inde_hand_arithmetic() {
        let a = [1.0, 0.0, 0.0];
        let y = [0.0, 0.0, 0.0];
        let e = 0.5;
        let m1 = [0.6, 0.5, 0.4];
        let m0 = 0.2;
        let r = ps_inde(&ds(&a, &y), &nf(&[e; 3], &[m0; 3], &m1, EST)).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..3 {
            num += m1[i] * (1.0 - y[i]) * (a[i] - 1.0)
                - a[i] / e * (1.0 - e) * (y[i] - m1[i]) * (1.0 - m0);
            den += (1.0 - y[i]) * (a[i] - 1.0);
        }
        assert_abs_diff_eq!(r.value, num / den, epsilon = 1e-12);
    }

    #[test]
    fn known_variants() {
        let d = ds(&[1.0, 0.0, 1.0, 0.0], &[1.0, 0.0, 1.0, 0.0]);
        let f = nf(&[0.5; 4], &[0.0; 4], &[1.0; 4], KNOWN);
        assert_abs_diff_eq!(ps_mono_known_e(&d, &f).unwrap().value, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ps_inde_known_e(&d, &f).unwrap().value, 1.0, epsilon = 1e-15);

        let m = [1.0, 0.0, 1.0, 0.0];
        let f = nf(&[0.5; 4], &m, &m, KNOWN);
        assert_abs_diff_eq!(ps_mono_known_e(&d, &f).unwrap().value, 0.0, epsilon = 1e-15);

        let f = nf(&[0.5; 4], &[0.0; 4], &[1.0; 4], EST);
        assert!(matches!(
            ps_mono_known_e(&d, &f),
            Err(Error::WrongVariant(_))
        ));
        assert!(
            ps_mono_known_e(&d, &nf(&[0.5; 4], &[0.0; 4], &[1.0; 4], KNOWN))
                .unwrap()
                .se
                .is_none()
        );
    }

    #[test]
    fn known_zero_denominator() {
        // (1 - mu0)(1 - e) - (1 - A)(Y - mu0) vanishes when mu0 = 1 and controls have Y = 1
        let d = ds(&[1.0, 0.0], &[1.0, 1.0]);
        let f = nf(&[0.5; 2], &[1.0; 2], &[1.0; 2], KNOWN);
        assert!(matches!(
            ps_mono_known_e(&d, &f),
            Err(Error::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn influence_mean_zero() {
        let d = ds(&[1.0, 0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 1.0, 1.0, 0.0]);
        let f = nf(
            &[0.3, 0.6, 0.5, 0.2, 0.7],
            &[0.2, 0.3, 0.4, 0.1, 0.5],
            &[0.6, 0.5, 0.8, 0.4, 0.9],
            EST,
        );
        for (asm, fun) in [
            (
                Assumption::Monotonicity,
                ps_mono as fn(&Dataset, &NuisanceFit) -> Result<Estimate>,
            ),
            (Assumption::CondIndependence, ps_inde),
        ] {
            let r = fun(&d, &f).unwrap();
            let iv = ps_influence_values(&d, &f, r.value, asm).unwrap();
            let mean = iv.values.iter().map(|z| z - r.value).sum::<f64>() / 5.0;
            assert!(mean.abs() < 1e-12);
            assert_eq!(iv.standard_error(), r.se.unwrap());
        }
    }
}
