use super::{compute, influence_values, Assumption, Estimate, Estimator, InfluenceValues, Unit};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::{NuisanceFit, PropensitySource};

pub(super) fn unit_terms(est: Estimator, u: &Unit) -> (f64, f64) {
    let Unit { a, y, e, m0, m1 } = *u;
    // weighted control residual e/(1-e) * (1-A)(Y-mu0)
    let ctrl = e * (1.0 - a) * (y - m0) / (1.0 - e);
    match est {
        Estimator::PnMono => (a * (y - m0) - ctrl, a * y),
        Estimator::PnInde => (a * (1.0 - m0) * y - ctrl * m1, a * y),
        Estimator::PnMonoKnownE => (a * (y - m1) - ctrl + (m1 - m0) * e, a * (y - m1) + m1 * e),
        Estimator::PnIndeKnownE => (
            (1.0 - m0) * a * (y - m1) + (1.0 - m0) * m1 * e - ctrl * m1,
            a * (y - m1) + m1 * e,
        ),
        // 1 - sum(ctrl * Y) / sum(AY), written as a ratio
        Estimator::PnIpw => (a * y - e * (1.0 - a) * y / (1.0 - e), a * y),
        // 1 - sum(A mu0) / sum(A mu1)
        Estimator::PnOr => (a * (m1 - m0), a * m1),
        _ => unreachable!("{est} is not a PN estimator"),
    }
}

pub fn pn_mono(d: &Dataset, nf: &NuisanceFit) -> Result<Estimate> {
    compute(Estimator::PnMono, d, nf)
}

pub fn pn_inde(d: &Dataset, nf: &NuisanceFit) -> Result<Estimate> {
    compute(Estimator::PnInde, d, nf)
}

pub fn pn_mono_known_e(d: &Dataset, nf: &NuisanceFit) -> Result<Estimate> {
    compute(Estimator::PnMonoKnownE, d, nf)
}

pub fn pn_inde_known_e(d: &Dataset, nf: &NuisanceFit) -> Result<Estimate> {
    compute(Estimator::PnIndeKnownE, d, nf)
}

/// Point estimate only; the standard error comes from [`super::bootstrap`].
pub fn pn_ipw(d: &Dataset, nf: &NuisanceFit) -> Result<Estimate> {
    compute(Estimator::PnIpw, d, nf)
}

/// Point estimate only; the standard error comes from [`super::bootstrap`].
pub fn pn_or(d: &Dataset, nf: &NuisanceFit) -> Result<Estimate> {
    compute(Estimator::PnOr, d, nf)
}

pub fn pn_influence_values(
    d: &Dataset,
    nf: &NuisanceFit,
    beta_hat: f64,
    assumption: Assumption,
    known_e: bool,
) -> Result<InfluenceValues> {
    if known_e != (nf.propensity_source == PropensitySource::Known) {
        return Err(Error::WrongVariant(format!(
            "known_e = {known_e} but the nuisance fit has {} propensities",
            nf.propensity_source
        )));
    }
    let est = Estimator::proposed(super::Estimand::Pn, assumption, known_e);
    influence_values(est, d, nf, beta_hat)
}
