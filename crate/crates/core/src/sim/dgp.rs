use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::nuisance::expit;
use crate::rng::{stage, Stream, StreamRng};

/// Basis function of the covariates. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Term {
    Const,
    X(usize),
    Sin(usize),
    /// `log(1 + x_j^2)`
    Log1pSq(usize),
    /// `sin(x_j) cos(x_k)`
    SinCos(usize, usize),
    Exp(usize),
    Prod(usize, usize),
    /// `sin(x_j)^2`
    SinSq(usize),
    /// `cos(x_j) sin(x_k)`
    CosSin(usize, usize),
    /// `log(1 + |x_j|) cos(x_k)`
    Log1pAbsCos(usize, usize),
}

impl Term {
    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Term::Const => 1.0,
            Term::X(j) => x[j],
            Term::Sin(j) => x[j].sin(),
            Term::Log1pSq(j) => (x[j] * x[j]).ln_1p(),
            Term::SinCos(j, k) => x[j].sin() * x[k].cos(),
            Term::Exp(j) => x[j].exp(),
            Term::Prod(j, k) => x[j] * x[k],
            Term::SinSq(j) => x[j].sin().powi(2),
            Term::CosSin(j, k) => x[j].cos() * x[k].sin(),
            Term::Log1pAbsCos(j, k) => x[j].abs().ln_1p() * x[k].cos(),
        }
    }

    fn is_linear(self) -> bool {
        matches!(self, Term::Const | Term::X(_))
    }
}

/// Logit-scale index: a weighted sum of terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Index(pub Vec<(f64, Term)>);

impl Index {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|&(c, t)| c * t.eval(x)).sum()
    }

    pub fn prob(&self, x: &[f64]) -> f64 {
        expit(self.eval(x))
    }

    /// Representable by a main-effects logistic model.
    pub fn is_linear(&self) -> bool {
        self.0.iter().all(|(_, t)| t.is_linear())
    }

    fn scaled(mut self, s: f64) -> Self {
        for (c, _) in &mut self.0 {
            *c *= s;
        }
        self
    }

    fn plus(mut self, c: f64) -> Self {
        self.0.push((c, Term::Const));
        self
    }
}

fn lin(coefs: &[f64]) -> Index {
    Index(
        coefs
            .iter()
            .enumerate()
            .map(|(j, &c)| (c, Term::X(j)))
            .collect(),
    )
}

fn terms(t: &[(f64, Term)]) -> Index {
    Index(t.to_vec())
}

/// Which nuisances a main-effects logistic regression is taken to specify correctly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NuisanceTruth {
    pub propensity: bool,
    pub outcome: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DgpSpec {
    pub case_id: u32,
    pub p: usize,
    /// Covariates are N(0, cov_scale * I_p).
    pub cov_scale: f64,
    pub propensity: Index,
    /// Index of P(Y0 = 1 | X) before the monotonicity adjustment.
    pub mu0: Index,
    pub mu1: Index,
    /// Set Y0 = 0 whenever Y1 = 0.
    pub monotone: bool,
    pub nuisance_truth: NuisanceTruth,
    pub note: Option<&'static str>,
}

pub const CASES: std::ops::RangeInclusive<u32> = 1..=19;

const CASE8_NOTE: &str =
    "covariate law printed as 2-dimensional while the propensity uses X1..X5; \
                          5-dimensional reading used, see case8_two_dim for the other";

/// Simulation design for a case id in 1..=19.
pub fn registry(case_id: u32) -> Result<DgpSpec> {
    use Term::*;
    let both = NuisanceTruth {
        propensity: true,
        outcome: true,
    };
    let e_wrong = NuisanceTruth {
        propensity: false,
        outcome: true,
    };
    let mu_wrong = NuisanceTruth {
        propensity: true,
        outcome: false,
    };
    let spec = |p, cov_scale, propensity, mu0, mu1, monotone, nuisance_truth| DgpSpec {
        case_id,
        p,
        cov_scale,
        propensity,
        mu0,
        mu1,
        monotone,
        nuisance_truth,
        note: None,
    };
    let alt2 = || lin(&[1.0, -1.0]).scaled(0.5);
    let alt5 = || lin(&[1.0, -1.0, 1.0, -1.0, 1.0]);
    let s = match case_id {
        1 | 2 => spec(
            2,
            4.0,
            lin(&[1.0, 1.0]).scaled(1.0 / 8.0),
            alt2(),
            lin(&[2.0, 3.0]).scaled(1.0 / 3.0).plus(0.5),
            case_id == 1,
            both,
        ),
        3 | 4 => spec(
            5,
            4.0,
            lin(&[1.0; 5]).scaled(1.0 / 8.0),
            alt5().scaled(0.5),
            lin(&[2.0, 3.0, 2.0, 3.0, 2.0]).scaled(1.0 / 3.0).plus(0.5),
            case_id == 3,
            both,
        ),
        5..=16 => {
            let base = if case_id <= 10 { case_id } else { case_id - 6 };
            let monotone = case_id <= 10;
            let lin_m1_2 = || lin(&[0.4, 0.6]).plus(0.5);
            let lin_m1_5 = || lin(&[0.4, 0.6, 0.4, 0.6, 0.4]).plus(0.5);
            let e2 = || lin(&[1.0, 1.0]).scaled(0.5);
            let e5 = || lin(&[1.0; 5]).scaled(0.5);
            let mut s = match base {
                5 => spec(2, 1.0, e2(), alt2(), lin_m1_2(), monotone, both),
                6 => spec(
                    2,
                    1.0,
                    terms(&[(0.5, Sin(0)), (0.5, Log1pSq(1))]),
                    alt2(),
                    lin_m1_2(),
                    monotone,
                    e_wrong,
                ),
                7 => spec(
                    2,
                    1.0,
                    e2(),
                    terms(&[(0.5, Sin(0)), (-0.5, Log1pSq(1))]),
                    terms(&[(0.4, Sin(0)), (0.6, Log1pSq(1)), (0.5, Const)]),
                    monotone,
                    mu_wrong,
                ),
                8 => spec(5, 1.0, e5(), alt2(), lin_m1_2(), monotone, both),
                9 => spec(
                    5,
                    1.0,
                    terms(&[
                        (1.0, Sin(0)),
                        (1.0, Log1pSq(1)),
                        (1.0, SinCos(0, 2)),
                        (1.0, Exp(3)),
                        (1.0, Prod(3, 4)),
                    ])
                    .scaled(0.5),
                    alt5().scaled(0.5),
                    lin_m1_5(),
                    monotone,
                    e_wrong,
                ),
                _ => spec(
                    5,
                    1.0,
                    e5(),
                    terms(&[
                        (1.0, Sin(0)),
                        (-1.0, Log1pSq(1)),
                        (1.0, SinCos(0, 2)),
                        (-1.0, Exp(3)),
                        (1.0, Prod(3, 4)),
                    ])
                    .scaled(0.5),
                    terms(&[
                        (0.4, Sin(0)),
                        (0.6, Log1pSq(1)),
                        (0.4, SinCos(0, 2)),
                        (0.6, Exp(3)),
                        (0.4, Prod(3, 4)),
                        (0.5, Const),
                    ]),
                    monotone,
                    mu_wrong,
                ),
            };
            if base == 8 {
                s.note = Some(CASE8_NOTE);
            }
            s
        }
        17 => spec(
            5,
            4.0,
            lin(&[1.0; 5]).scaled(0.5),
            alt5().scaled(0.2),
            lin(&[1.0, 2.0, 1.0, 2.0, 1.0]).scaled(0.2).plus(0.5),
            true,
            both,
        ),
        18 => spec(
            5,
            9.0,
            terms(&[
                (1.0, Sin(0)),
                (1.0, Log1pSq(1)),
                (1.0, SinSq(2)),
                (1.0, CosSin(1, 3)),
                (1.0, X(4)),
            ]),
            alt5().scaled(0.2),
            lin(&[1.0; 5]).scaled(0.2).plus(0.5),
            true,
            e_wrong,
        ),
        19 => spec(
            5,
            9.0,
            lin(&[1.0; 5]).scaled(0.5),
            terms(&[
                (1.0, Sin(0)),
                (-1.0, Log1pSq(1)),
                (1.0, SinSq(2)),
                (-1.0, Log1pAbsCos(4, 3)),
                (1.0, Sin(4)),
            ]),
            terms(&[
                (1.0, Sin(0)),
                (1.0, Log1pSq(1)),
                (1.0, SinSq(2)),
                (1.0, Log1pAbsCos(4, 3)),
                (1.0, Sin(4)),
                (1.0, Const),
            ]),
            true,
            mu_wrong,
        ),
        _ => return Err(Error::Registry(case_id)),
    };
    Ok(s)
}

/// Case 8 (or 14) under the literal 2-dimensional covariate law, with the
/// propensity index truncated to `(X1 + X2) / 2`.
pub fn case8_two_dim(case_id: u32) -> Result<DgpSpec> {
    if case_id != 8 && case_id != 14 {
        return Err(Error::Registry(case_id));
    }
    let mut s = registry(case_id)?;
    s.p = 2;
    s.propensity = lin(&[1.0, 1.0]).scaled(0.5);
    s.note = Some("2-dimensional reading of case 8");
    Ok(s)
}

impl DgpSpec {
    /// Observable outcome regression in arm 0: `m0 * m1` under the adjustment.
    pub fn mu0_observed(&self, x: &[f64]) -> f64 {
        let m0 = self.mu0.prob(x);
        if self.monotone {
            m0 * self.mu1.prob(x)
        } else {
            m0
        }
    }

    fn draw_x(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let sd = self.cov_scale.sqrt();
        for v in out {
            *v = sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PotentialOutcome {
    pub y0: u8,
    pub y1: u8,
}

/// Generating nuisance values for each unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueNuisances {
    pub e: Vec<f64>,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseSample {
    pub dataset: Dataset,
    pub potential: Vec<PotentialOutcome>,
    pub truth: TrueNuisances,
}

/// `n` units of `spec` from the stream `(seed, DATA, case)`.
pub fn generate_case(spec: &DgpSpec, n: usize, seed: u64) -> Result<CaseSample> {
    let stream = Stream::new(seed).path(&[stage::DATA, spec.case_id as u64]);
    generate_from(spec, n, &stream)
}

/// `n` units drawn from an explicit stream.
pub fn generate_from(spec: &DgpSpec, n: usize, stream: &Stream) -> Result<CaseSample> {
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    let mut rng = stream.rng();
    let p = spec.p;
    let mut xs = vec![0.0; n * p];
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut potential = Vec::with_capacity(n);
    let mut truth = TrueNuisances {
        e: Vec::with_capacity(n),
        mu0: Vec::with_capacity(n),
        mu1: Vec::with_capacity(n),
    };
    for row in xs.chunks_exact_mut(p) {
        let u = draw_unit(spec, &mut rng, row);
        a.push(u.a as f64);
        y.push(if u.a == 1 { u.po.y1 } else { u.po.y0 } as f64);
        potential.push(u.po);
        truth.e.push(u.e);
        truth.mu0.push(u.mu0_obs);
        truth.mu1.push(u.m1);
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    let dataset = Dataset::with_names(Matrix::from_row_major(n, p, xs), a, y, names)?;
    Ok(CaseSample {
        dataset,
        potential,
        truth,
    })
}

pub(crate) struct DrawnUnit {
    pub a: u8,
    pub po: PotentialOutcome,
    pub e: f64,
    pub m1: f64,
    pub mu0_obs: f64,
}

pub(crate) fn draw_unit(spec: &DgpSpec, rng: &mut StreamRng, x: &mut [f64]) -> DrawnUnit {
    spec.draw_x(rng, x);
    let e = spec.propensity.prob(x);
    let m0 = spec.mu0.prob(x);
    let m1 = spec.mu1.prob(x);
    let a = (rng.random::<f64>() < e) as u8;
    let mut y0 = (rng.random::<f64>() < m0) as u8;
    let y1 = (rng.random::<f64>() < m1) as u8;
    if spec.monotone && y1 == 0 {
        y0 = 0;
    }
    DrawnUnit {
        a,
        po: PotentialOutcome { y0, y1 },
        e,
        m1,
        mu0_obs: if spec.monotone { m0 * m1 } else { m0 },
    }
}
