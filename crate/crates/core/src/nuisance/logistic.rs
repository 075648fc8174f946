use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_RIDGE: f64 = 1e-8;

#[inline]
pub fn expit(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let ez = z.exp();
        ez / (1.0 + ez)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

// log(1 + exp(z)) without overflow
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn linear_predictor(coef: &[f64], row: &[f64]) -> f64 {
    coef[0] + coef[1..].iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
}

/// Bernoulli log-likelihood of `t` under linear predictor `coef` (intercept first).
pub fn log_likelihood(x: &Matrix, t: &[f64], coef: &[f64]) -> f64 {
    x.rows()
        .zip(t)
        .map(|(r, &ti)| {
            let eta = linear_predictor(coef, r);
            ti * eta - softplus(eta)
        })
        .sum()
}

/// Main-effects logistic regression fitted by IRLS.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticModel {
    /// Intercept first, then one slope per column.
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_log_likelihood: f64,
}

impl LogisticModel {
    /// A model that predicts `p` everywhere.
    pub fn constant(p: f64, ncols: usize) -> Self {
        let mut coefficients = vec![0.0; ncols + 1];
        coefficients[0] = logit(p);
        LogisticModel {
            coefficients,
            converged: true,
            iterations: 0,
            final_log_likelihood: f64::NAN,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        expit(linear_predictor(&self.coefficients, row))
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IrlsOptions {
    /// Penalty on slopes only; the intercept is never shrunk.
    pub ridge: f64,
    pub max_iter: usize,
    /// Convergence threshold on the change in penalized log-likelihood.
    pub tol: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions {
            ridge: DEFAULT_RIDGE,
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

pub fn fit_logistic(x: &Matrix, t: &[f64], ridge: f64) -> Result<LogisticModel> {
    fit_logistic_with(
        x,
        t,
        &IrlsOptions {
            ridge,
            ..IrlsOptions::default()
        },
    )
}

/// Newton-Raphson (IRLS) with step halving, so the penalized log-likelihood
/// never decreases between accepted iterates.
pub fn fit_logistic_with(x: &Matrix, t: &[f64], opts: &IrlsOptions) -> Result<LogisticModel> {
    let n = x.nrows();
    let p = x.ncols();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if t.len() != n {
        return Err(Error::Argument(format!("{} targets for {n} rows", t.len())));
    }
    if opts.ridge < 0.0 || !opts.ridge.is_finite() {
        return Err(Error::Argument(format!(
            "ridge must be >= 0, got {}",
            opts.ridge
        )));
    }
    let d = p + 1;
    let ybar = t.iter().sum::<f64>() / n as f64;
    let mut beta = vec![0.0; d];
    if ybar <= 0.0 || ybar >= 1.0 {
        // No finite maximizer for the intercept.
        return Err(Error::Diverged {
            iterations: 0,
            coefficients: beta,
        });
    }
    beta[0] = logit(ybar);

    let objective = |b: &[f64]| -> f64 {
        let pen: f64 = b[1..].iter().map(|v| v * v).sum();
        log_likelihood(x, t, b) - 0.5 * opts.ridge * pen
    };

    let mut ll = objective(&beta);
    let mut hess = vec![0.0; d * d];
    let mut grad = vec![0.0; d];
    let mut xi = vec![0.0; d];
    xi[0] = 1.0;

    for iter in 1..=opts.max_iter {
        hess.iter_mut().for_each(|v| *v = 0.0);
        grad.iter_mut().for_each(|v| *v = 0.0);
        for (r, &ti) in x.rows().zip(t) {
            xi[1..].copy_from_slice(r);
            let mu = expit(linear_predictor(&beta, r));
            let w = (mu * (1.0 - mu)).max(1e-12);
            let res = ti - mu;
            for a in 0..d {
                grad[a] += xi[a] * res;
                let wa = w * xi[a];
                let row = &mut hess[a * d..a * d + a + 1];
                for (b, h) in row.iter_mut().enumerate() {
                    *h += wa * xi[b];
                }
            }
        }
        for a in 1..d {
            grad[a] -= opts.ridge * beta[a];
            hess[a * d + a] += opts.ridge;
        }
        for a in 0..d {
            for b in 0..a {
                hess[b * d + a] = hess[a * d + b];
            }
        }
        let step = solve_spd(&hess, &grad, d);

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let cand_ll = objective(&cand);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                accepted = Some((cand, cand_ll));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, cand_ll)) = accepted else {
            // No ascent direction left: we are at the optimum to machine precision.
            return Ok(LogisticModel {
                coefficients: beta,
                converged: true,
                iterations: iter,
                final_log_likelihood: ll,
            });
        };
        let change = cand_ll - ll;
        beta = cand;
        ll = cand_ll;
        if change.abs() < opts.tol {
            return Ok(LogisticModel {
                coefficients: beta,
                converged: true,
                iterations: iter,
                final_log_likelihood: ll,
            });
        }
    }
    Err(Error::Diverged {
        iterations: opts.max_iter,
        coefficients: beta,
    })
}

// Solves H s = g for a symmetric positive (semi)definite H, adding a small
// diagonal jitter when Cholesky fails (collinear columns).
fn solve_spd(h: &[f64], g: &[f64], d: usize) -> Vec<f64> {
    let gv = DVector::from_column_slice(g);
    let mut jitter = 0.0;
    let scale = (0..d).map(|i| h[i * d + i]).fold(0.0f64, f64::max).max(1.0);
    for _ in 0..12 {
        let mut m = DMatrix::from_row_slice(d, d, h);
        for i in 0..d {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            return ch.solve(&gv).as_slice().to_vec();
        }
        jitter = if jitter == 0.0 {
            1e-10 * scale
        } else {
            jitter * 10.0
        };
    }
    // Fall back to a gradient step.
    g.iter().map(|v| v / scale).collect()
}
