//! Ratio estimators of PN and PS, their influence values and standard errors.
//!
//! Every estimator here has the form `theta = mean(N_i) / mean(D_i)` for
//! per-unit numerator and denominator terms built from the data and the
//! nuisance predictions. The plug-in variance uses the linearization of that
//! ratio, `psi_i = (N_i - theta * D_i) / mean(D)`, which has mean exactly zero
//! at the solution.

mod bootstrap;
mod pipeline;
mod pn;
mod ps;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::function::erf::erfc;

pub use bootstrap::{bootstrap, BootstrapConfig, BootstrapSummary};
pub use pipeline::{estimate, EstimateConfig, EstimateRun};
pub use pn::{
    pn_inde, pn_inde_known_e, pn_influence_values, pn_ipw, pn_mono, pn_mono_known_e, pn_or,
};
pub use ps::{ps_inde, ps_inde_known_e, ps_influence_values, ps_mono, ps_mono_known_e};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::{NuisanceFit, PropensitySource};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimand {
    Pn,
    Ps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Ipw,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Assumption {
    #[serde(rename = "mono")]
    Monotonicity,
    #[serde(rename = "inde")]
    CondIndependence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeSource {
    Plugin,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateWarning {
    OutsideUnitInterval,
}

/// The ten estimators, named as on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    PnMono,
    PnInde,
    PnMonoKnownE,
    PnIndeKnownE,
    PnIpw,
    PnOr,
    PsMono,
    PsInde,
    PsMonoKnownE,
    PsIndeKnownE,
}

impl Estimator {
    pub const ALL: [Estimator; 10] = [
        Estimator::PnMono,
        Estimator::PnInde,
        Estimator::PnMonoKnownE,
        Estimator::PnIndeKnownE,
        Estimator::PnIpw,
        Estimator::PnOr,
        Estimator::PsMono,
        Estimator::PsInde,
        Estimator::PsMonoKnownE,
        Estimator::PsIndeKnownE,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::PnMono => "pn_mono",
            Estimator::PnInde => "pn_inde",
            Estimator::PnMonoKnownE => "pn_mono_known_e",
            Estimator::PnIndeKnownE => "pn_inde_known_e",
            Estimator::PnIpw => "pn_ipw",
            Estimator::PnOr => "pn_or",
            Estimator::PsMono => "ps_mono",
            Estimator::PsInde => "ps_inde",
            Estimator::PsMonoKnownE => "ps_mono_known_e",
            Estimator::PsIndeKnownE => "ps_inde_known_e",
        }
    }

    /// The efficient estimator for an (estimand, assumption, propensity) triple.
    pub fn proposed(estimand: Estimand, assumption: Assumption, known_e: bool) -> Estimator {
        use Assumption::*;
        match (estimand, assumption, known_e) {
            (Estimand::Pn, Monotonicity, false) => Estimator::PnMono,
            (Estimand::Pn, CondIndependence, false) => Estimator::PnInde,
            (Estimand::Pn, Monotonicity, true) => Estimator::PnMonoKnownE,
            (Estimand::Pn, CondIndependence, true) => Estimator::PnIndeKnownE,
            (Estimand::Ps, Monotonicity, false) => Estimator::PsMono,
            (Estimand::Ps, CondIndependence, false) => Estimator::PsInde,
            (Estimand::Ps, Monotonicity, true) => Estimator::PsMonoKnownE,
            (Estimand::Ps, CondIndependence, true) => Estimator::PsIndeKnownE,
        }
    }

    /// The known-propensity counterpart of a proposed estimator.
    pub fn with_known_e(self) -> Option<Estimator> {
        match self.method() {
            Method::Proposed => Some(Estimator::proposed(
                self.estimand(),
                self.assumption(),
                true,
            )),
            _ => None,
        }
    }

    pub fn estimand(self) -> Estimand {
        match self {
            Estimator::PsMono
            | Estimator::PsInde
            | Estimator::PsMonoKnownE
            | Estimator::PsIndeKnownE => Estimand::Ps,
            _ => Estimand::Pn,
        }
    }

    pub fn method(self) -> Method {
        match self {
            Estimator::PnIpw => Method::Ipw,
            Estimator::PnOr => Method::Or,
            _ => Method::Proposed,
        }
    }

    /// The baselines identify PN through the monotonicity formula.
    pub fn assumption(self) -> Assumption {
        match self {
            Estimator::PnInde
            | Estimator::PnIndeKnownE
            | Estimator::PsInde
            | Estimator::PsIndeKnownE => Assumption::CondIndependence,
            _ => Assumption::Monotonicity,
        }
    }

    pub fn requires_known_e(self) -> bool {
        matches!(
            self,
            Estimator::PnMonoKnownE
                | Estimator::PnIndeKnownE
                | Estimator::PsMonoKnownE
                | Estimator::PsIndeKnownE
        )
    }

    /// Whether a closed-form plug-in standard error is available; the rest use the bootstrap.
    pub fn has_plugin_se(self) -> bool {
        matches!(
            self,
            Estimator::PnMono
                | Estimator::PnInde
                | Estimator::PnMonoKnownE
                | Estimator::PnIndeKnownE
                | Estimator::PsMono
                | Estimator::PsInde
        )
    }

    /// Per-unit numerator and denominator terms.
    pub(crate) fn terms(self, d: &Dataset, nf: &NuisanceFit) -> (Vec<f64>, Vec<f64>) {
        let n = d.n();
        let mut num = Vec::with_capacity(n);
        let mut den = Vec::with_capacity(n);
        for i in 0..n {
            let u = Unit {
                a: d.a()[i],
                y: d.y()[i],
                e: nf.e_hat[i],
                m0: nf.mu0_hat[i],
                m1: nf.mu1_hat[i],
            };
            let (p, q) = match self.estimand() {
                Estimand::Pn => pn::unit_terms(self, &u),
                Estimand::Ps => ps::unit_terms(self, &u),
            };
            num.push(p);
            den.push(q);
        }
        (num, den)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown estimator `{s}`")))
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimand::Pn => "pn",
            Estimand::Ps => "ps",
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Proposed => "proposed",
            Method::Ipw => "ipw",
            Method::Or => "or",
        })
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Assumption::Monotonicity => "mono",
            Assumption::CondIndependence => "inde",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Unit {
    pub a: f64,
    pub y: f64,
    pub e: f64,
    pub m0: f64,
    pub m1: f64,
}

/// Point estimate with optional standard error, Wald interval and p-value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub estimand: Estimand,
    pub estimator: Estimator,
    pub method: Method,
    pub assumption: Assumption,
    pub propensity_source: PropensitySource,
    pub value: f64,
    pub se: Option<f64>,
    pub se_source: Option<SeSource>,
    pub ci: Option<[f64; 2]>,
    pub p_value: Option<f64>,
    pub n: usize,
    pub warnings: Vec<EstimateWarning>,
}

impl Estimate {
    fn new(estimator: Estimator, value: f64, n: usize, source: PropensitySource) -> Self {
        let mut warnings = Vec::new();
        if !(0.0..=1.0).contains(&value) {
            warnings.push(EstimateWarning::OutsideUnitInterval);
        }
        Estimate {
            estimand: estimator.estimand(),
            estimator,
            method: estimator.method(),
            assumption: estimator.assumption(),
            propensity_source: source,
            value,
            se: None,
            se_source: None,
            ci: None,
            p_value: None,
            n,
            warnings,
        }
    }

    /// Attaches a standard error and derives the Wald interval and the
    /// two-sided p-value for a zero null.
    pub fn with_se(mut self, se: f64, source: SeSource) -> Self {
        self.se = Some(se);
        self.se_source = Some(source);
        self.ci = Some([self.value - Z95 * se, self.value + Z95 * se]);
        self.p_value = Some(two_sided_p(self.value, se));
        self
    }

    pub fn ci_low(&self) -> Option<f64> {
        self.ci.map(|c| c[0])
    }

    pub fn ci_high(&self) -> Option<f64> {
        self.ci.map(|c| c[1])
    }

    pub fn covers(&self, truth: f64) -> Option<bool> {
        self.ci.map(|[lo, hi]| lo <= truth && truth <= hi)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("estimate serializes")
    }

    pub const CSV_HEADER: &'static str =
        "estimand,estimator,method,assumption,propensity_source,value,se,ci_low,ci_high,p_value,n,warnings";

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        let warnings: Vec<&str> = self
            .warnings
            .iter()
            .map(|w| match w {
                EstimateWarning::OutsideUnitInterval => "outside-unit-interval",
            })
            .collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.estimand,
            self.estimator,
            self.method,
            self.assumption,
            self.propensity_source,
            self.value,
            opt(self.se),
            opt(self.ci_low()),
            opt(self.ci_high()),
            opt(self.p_value),
            self.n,
            warnings.join(";")
        )
    }
}

pub fn two_sided_p(value: f64, se: f64) -> f64 {
    if se > 0.0 {
        erfc(value.abs() / se / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
    } else if value == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Per-unit influence values `zeta_i` whose centred mean is zero at the solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceValues {
    pub estimator: Estimator,
    pub values: Vec<f64>,
    pub estimand_at_solution: f64,
}

impl InfluenceValues {
    /// `sqrt(mean((zeta - theta)^2) / n)`.
    pub fn standard_error(&self) -> f64 {
        let n = self.values.len() as f64;
        let theta = self.estimand_at_solution;
        let var = self.values.iter().map(|z| (z - theta).powi(2)).sum::<f64>() / n;
        (var / n).sqrt()
    }
}

struct Ratio {
    num: Vec<f64>,
    den: Vec<f64>,
    num_mean: f64,
    den_mean: f64,
}

fn ratio(est: Estimator, d: &Dataset, nf: &NuisanceFit) -> Result<Ratio> {
    nf.validate(d.n())?;
    if est.requires_known_e() && nf.propensity_source != PropensitySource::Known {
        return Err(Error::WrongVariant(format!(
            "{est} needs known propensities but the nuisance fit is estimated"
        )));
    }
    let (num, den) = est.terms(d, nf);
    let n = d.n() as f64;
    let num_mean = num.iter().sum::<f64>() / n;
    let den_mean = den.iter().sum::<f64>() / n;
    match est {
        Estimator::PnMono | Estimator::PnInde | Estimator::PnIpw if d.treated_cases() == 0 => {
            return Err(Error::NoTreatedCases);
        }
        Estimator::PsMono | Estimator::PsInde if d.control_noncases() == 0 => {
            return Err(Error::DegenerateDenominator(est.name()));
        }
        _ => {}
    }
    if !(den_mean.abs() > 1e-12) || !num_mean.is_finite() {
        return Err(Error::DegenerateDenominator(est.name()));
    }
    Ok(Ratio {
        num,
        den,
        num_mean,
        den_mean,
    })
}

/// Point estimate only (no standard error).
pub fn point_estimate(est: Estimator, d: &Dataset, nf: &NuisanceFit) -> Result<Estimate> {
    let r = ratio(est, d, nf)?;
    Ok(Estimate::new(
        est,
        r.num_mean / r.den_mean,
        d.n(),
        nf.propensity_source,
    ))
}

/// Point estimate plus the plug-in standard error where one is available.
pub fn compute(est: Estimator, d: &Dataset, nf: &NuisanceFit) -> Result<Estimate> {
    let r = ratio(est, d, nf)?;
    let theta = r.num_mean / r.den_mean;
    let mut out = Estimate::new(est, theta, d.n(), nf.propensity_source);
    if est.has_plugin_se() {
        let iv = influence_from_ratio(est, &r, theta);
        out = out.with_se(iv.standard_error(), SeSource::Plugin);
    }
    Ok(out)
}

fn influence_from_ratio(est: Estimator, r: &Ratio, theta: f64) -> InfluenceValues {
    let values = r
        .num
        .iter()
        .zip(&r.den)
        .map(|(&p, &q)| theta + (p - theta * q) / r.den_mean)
        .collect();
    InfluenceValues {
        estimator: est,
        values,
        estimand_at_solution: theta,
    }
}

/// Influence values of `est` evaluated at `theta`.
pub fn influence_values(
    est: Estimator,
    d: &Dataset,
    nf: &NuisanceFit,
    theta: f64,
) -> Result<InfluenceValues> {
    if !est.has_plugin_se() {
        return Err(Error::WrongVariant(format!(
            "{est} has no plug-in influence function"
        )));
    }
    let r = ratio(est, d, nf)?;
    Ok(influence_from_ratio(est, &r, theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Estimator::ALL {
            assert_eq!(e.name().parse::<Estimator>().unwrap(), e);
        }
        assert!("pn_foo".parse::<Estimator>().is_err());
    }

    #[test]
    fn se_and_interval_agree() {
        let d = Dataset::new(crate::data::Matrix::zeros(1, 0), vec![1.0], vec![1.0]).unwrap();
        let e = Estimate::new(Estimator::PnMono, 0.4, d.n(), PropensitySource::Estimated)
            .with_se(0.05, SeSource::Plugin);
        let [lo, hi] = e.ci.unwrap();
        assert!(lo <= e.value && e.value <= hi);
        assert!(((hi - lo) / (2.0 * Z95) - 0.05).abs() < 1e-15);
        // 0.4 / 0.05 = 8 standard errors
        assert!(e.p_value.unwrap() < 1e-14);
    }

    #[test]
    fn p_value_reference_points() {
        assert!((two_sided_p(1.959963984540054, 1.0) - 0.05).abs() < 1e-10);
        assert_eq!(two_sided_p(0.0, 1.0), 1.0);
        assert_eq!(two_sided_p(0.0, 0.0), 1.0);
        assert_eq!(two_sided_p(0.2, 0.0), 0.0);
    }

    #[test]
    fn known_counterparts() {
        assert_eq!(
            Estimator::PnMono.with_known_e(),
            Some(Estimator::PnMonoKnownE)
        );
        assert_eq!(
            Estimator::PsInde.with_known_e(),
            Some(Estimator::PsIndeKnownE)
        );
        assert_eq!(Estimator::PnIpw.with_known_e(), None);
    }
}
