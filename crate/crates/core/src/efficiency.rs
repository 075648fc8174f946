//! Empirical efficiency bounds for PN and the closed-form gaps between them.
//!
//! All four influence functions are evaluated at one reference value of PN and
//! share the normalizer `M1 = mean(e * mu1)`, so the assumption gap is an exact
//! in-sample identity: `bound_mono_unknown - bound_inde_unknown == gap_assumption`
//! for binary outcomes. The known-propensity gaps hold in expectation only.

use serde::Serialize;

use crate::data::{moment_functionals, Dataset};
use crate::error::{Error, Result};
use crate::estimators::pn_mono;
use crate::nuisance::NuisanceFit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficiencyReport {
    /// PN value at which the influence functions are evaluated.
    pub beta_ref: f64,
    /// `mean(e * mu1)`.
    pub m1: f64,
    pub bound_mono_unknown: f64,
    pub bound_inde_unknown: f64,
    pub bound_mono_known: f64,
    pub bound_inde_known: f64,
    pub gap_assumption: f64,
    pub gap_known_e_mono: f64,
    pub gap_known_e_inde: f64,
}

impl EfficiencyReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// Report at the `pn_mono` point estimate.
pub fn efficiency_report(d: &Dataset, nf: &NuisanceFit) -> Result<EfficiencyReport> {
    let beta = pn_mono(d, nf)?.value;
    efficiency_report_at(d, nf, beta)
}

pub fn efficiency_report_at(d: &Dataset, nf: &NuisanceFit, beta: f64) -> Result<EfficiencyReport> {
    nf.validate(d.n())?;
    let m1 = moment_functionals(nf).mu1;
    if !(m1 > 1e-12) {
        return Err(Error::DegenerateDenominator("efficiency_report"));
    }
    let n = d.n() as f64;
    let q = 1.0 - beta;
    let mut acc = [0.0f64; 7];
    for i in 0..d.n() {
        let (a, y) = (d.a()[i], d.y()[i]);
        let (e, m0, mu1) = (nf.e_hat[i], nf.mu0_hat[i], nf.mu1_hat[i]);
        let ctrl = e * (1.0 - a) * (y - m0) / ((1.0 - e) * m1);

        let phi = q * a * y / m1 - ctrl - m0 * a / m1;
        let vphi = a * (q - m0) * y / m1 - ctrl * mu1;
        let phi_k = q * a * (y - mu1) / m1 - ctrl + q * mu1 * e / m1 - m0 * e / m1;
        let vphi_k = (q - m0) / m1 * (a * (y - mu1) + mu1 * e) - ctrl * mu1;

        let c_mono = (q * mu1 - m0) / m1;
        let c_inde = mu1 * (q - m0) / m1;
        let var_a = e * (1.0 - e);

        acc[0] += phi * phi;
        acc[1] += vphi * vphi;
        acc[2] += phi_k * phi_k;
        acc[3] += vphi_k * vphi_k;
        acc[4] += a * m0 * m0 * (1.0 - y * y) / (m1 * m1) + ctrl * ctrl * (1.0 - mu1 * mu1);
        acc[5] += c_mono * c_mono * var_a;
        acc[6] += c_inde * c_inde * var_a;
    }
    let [b0, b1, b2, b3, g0, g1, g2] = acc.map(|s| s / n);
    Ok(EfficiencyReport {
        beta_ref: beta,
        m1,
        bound_mono_unknown: b0,
        bound_inde_unknown: b1,
        bound_mono_known: b2,
        bound_inde_known: b3,
        gap_assumption: g0,
        gap_known_e_mono: g1,
        gap_known_e_inde: g2,
    })
}
