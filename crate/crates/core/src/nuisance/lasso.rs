use serde::Serialize;

use super::logistic::{expit, logit};
use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::rng::{shuffled_indices, stage, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    pub n_lambdas: usize,
    /// Smallest grid value as a fraction of lambda_max.
    pub lambda_min_ratio: f64,
    pub cv_folds: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            n_lambdas: 100,
            lambda_min_ratio: 1e-3,
            cv_folds: 5,
            seed: 0,
            tol: 1e-9,
        }
    }
}

/// L1-penalized logistic regression. The objective is
/// `-(1/n) loglik + lambda * sum_j |b_j|` on internally standardized columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoLogisticModel {
    /// Original scale, intercept first.
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    /// `(lambda, mean CV deviance)` per grid point, largest lambda first. Empty for fixed-lambda fits.
    pub cv_curve: Vec<(f64, f64)>,
    /// Columns with zero variance; their coefficients are fixed at 0.
    pub dropped_columns: Vec<usize>,
}

impl LassoLogisticModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        expit(super::logistic::linear_predictor(&self.coefficients, row))
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }

    pub fn support(&self) -> Vec<usize> {
        (1..self.coefficients.len())
            .filter(|&j| self.coefficients[j] != 0.0)
            .map(|j| j - 1)
            .collect()
    }
}

pub fn fit_lasso_logistic(
    x: &Matrix,
    t: &[f64],
    n_lambdas: usize,
    cv_folds: usize,
) -> Result<LassoLogisticModel> {
    fit_lasso_logistic_with(
        x,
        t,
        &LassoOptions {
            n_lambdas,
            cv_folds,
            ..LassoOptions::default()
        },
    )
}

/// Full pipeline: lambda grid, k-fold CV on deviance, refit at the chosen lambda.
pub fn fit_lasso_logistic_with(
    x: &Matrix,
    t: &[f64],
    opts: &LassoOptions,
) -> Result<LassoLogisticModel> {
    let n = x.nrows();
    check_inputs(x, t)?;
    if opts.cv_folds < 2 || n < opts.cv_folds {
        return Err(Error::Argument(format!(
            "need n >= cv_folds >= 2 (n = {n}, cv_folds = {})",
            opts.cv_folds
        )));
    }
    if opts.n_lambdas == 0 {
        return Err(Error::Argument("n_lambdas must be positive".into()));
    }
    let full = Standardized::new(x);
    let grid = lambda_grid(
        lambda_max_std(&full, t),
        opts.n_lambdas,
        opts.lambda_min_ratio,
    );

    let mut rng = Stream::new(opts.seed).child(stage::LASSO_CV).rng();
    let order = shuffled_indices(n, &mut rng);
    let mut fold = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % opts.cv_folds;
    }

    let mut dev_sum = vec![0.0; grid.len()];
    let mut used_folds = 0usize;
    for k in 0..opts.cv_folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold[i] != k).collect();
        let valid: Vec<usize> = (0..n).filter(|&i| fold[i] == k).collect();
        let tt: Vec<f64> = train.iter().map(|&i| t[i]).collect();
        let tbar = tt.iter().sum::<f64>() / tt.len() as f64;
        if tbar == 0.0 || tbar == 1.0 {
            log::warn!("lasso CV fold {k} has a constant target; skipped");
            continue;
        }
        let xt = x.select_rows(&train);
        let std = Standardized::new(&xt);
        let mut state = State::new(&std, tbar);
        for (g, &lam) in grid.iter().enumerate() {
            state.solve(&std, &tt, lam, opts.tol);
            let coef = std.to_original(&state.beta, x.ncols());
            let dev: f64 = valid
                .iter()
                .map(|&i| {
                    deviance(
                        t[i],
                        expit(super::logistic::linear_predictor(&coef, x.row(i))),
                    )
                })
                .sum::<f64>()
                / valid.len() as f64;
            dev_sum[g] += dev;
        }
        used_folds += 1;
    }
    if used_folds == 0 {
        return Err(Error::DegenerateTarget);
    }
    let cv_curve: Vec<(f64, f64)> = grid
        .iter()
        .zip(&dev_sum)
        .map(|(&l, &s)| (l, s / used_folds as f64))
        .collect();
    // strict `<` keeps the larger lambda on ties
    let mut best = 0;
    for (g, c) in cv_curve.iter().enumerate() {
        if c.1 < cv_curve[best].1 {
            best = g;
        }
    }

    let tbar = t.iter().sum::<f64>() / n as f64;
    let mut state = State::new(&full, tbar);
    for &lam in &grid[..=best] {
        state.solve(&full, t, lam, opts.tol);
    }
    Ok(LassoLogisticModel {
        coefficients: full.to_original(&state.beta, x.ncols()),
        lambda: grid[best],
        cv_curve,
        dropped_columns: full.dropped.clone(),
    })
}

/// Fit at a single, caller-chosen lambda (no cross-validation).
pub fn fit_lasso_at(x: &Matrix, t: &[f64], lambda: f64) -> Result<LassoLogisticModel> {
    fit_lasso_at_with(x, t, lambda, LassoOptions::default().tol)
}

pub fn fit_lasso_at_with(
    x: &Matrix,
    t: &[f64],
    lambda: f64,
    tol: f64,
) -> Result<LassoLogisticModel> {
    fit_lasso_from(x, t, lambda, tol, None)
}

/// Fixed-lambda fit started from `init` (original scale, intercept first)
/// instead of the intercept-only model.
pub fn fit_lasso_from(
    x: &Matrix,
    t: &[f64],
    lambda: f64,
    tol: f64,
    init: Option<&[f64]>,
) -> Result<LassoLogisticModel> {
    check_inputs(x, t)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Argument(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let std = Standardized::new(x);
    let tbar = t.iter().sum::<f64>() / t.len() as f64;
    let mut state = State::new(&std, tbar);
    if let Some(b) = init {
        if b.len() != x.ncols() + 1 {
            return Err(Error::Argument(format!(
                "initial coefficients have length {}, expected {}",
                b.len(),
                x.ncols() + 1
            )));
        }
        if b.iter().all(|v| v.is_finite()) {
            let mut w = State::new(&std, tbar);
            w.warm(&std, b);
            if w.objective(t, lambda) < state.objective(t, lambda) {
                state = w;
            }
        }
    }
    state.solve(&std, t, lambda, tol);
    if init.is_some() && !state.beta.iter().all(|b| b.is_finite()) {
        state = State::new(&std, tbar);
        state.solve(&std, t, lambda, tol);
    }
    Ok(LassoLogisticModel {
        coefficients: std.to_original(&state.beta, x.ncols()),
        lambda,
        cv_curve: Vec::new(),
        dropped_columns: std.dropped.clone(),
    })
}

/// Smallest lambda at which every penalized coefficient is zero.
pub fn lambda_max(x: &Matrix, t: &[f64]) -> Result<f64> {
    check_inputs(x, t)?;
    Ok(lambda_max_std(&Standardized::new(x), t))
}

fn check_inputs(x: &Matrix, t: &[f64]) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    if t.len() != x.nrows() {
        return Err(Error::Argument(format!(
            "{} targets for {} rows",
            t.len(),
            x.nrows()
        )));
    }
    let s = t.iter().sum::<f64>();
    if s == 0.0 || s == t.len() as f64 {
        return Err(Error::DegenerateTarget);
    }
    Ok(())
}

fn lambda_grid(lmax: f64, k: usize, ratio: f64) -> Vec<f64> {
    if k == 1 || lmax == 0.0 {
        return vec![lmax; k];
    }
    let (hi, lo) = (lmax.ln(), (lmax * ratio).ln());
    (0..k)
        .map(|i| (hi + (lo - hi) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

fn lambda_max_std(std: &Standardized, t: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tbar = t.iter().sum::<f64>() / n;
    (0..std.kept.len())
        .map(|k| {
            std.col(k)
                .iter()
                .zip(t)
                .map(|(x, y)| x * (y - tbar))
                .sum::<f64>()
                .abs()
                / n
        })
        .fold(0.0, f64::max)
}

fn deviance(t: f64, p: f64) -> f64 {
    let p = p.clamp(1e-15, 1.0 - 1e-15);
    -2.0 * (t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

// Column-major standardized copy of the non-constant columns.
struct Standardized {
    n: usize,
    data: Vec<f64>,
    kept: Vec<usize>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    dropped: Vec<usize>,
}

impl Standardized {
    fn new(x: &Matrix) -> Self {
        let n = x.nrows();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        let mut mean = Vec::new();
        let mut sd = Vec::new();
        let mut data = Vec::new();
        for j in 0..x.ncols() {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n as f64;
            let v = col.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / n as f64;
            let s = v.sqrt();
            if !(s > 1e-12 * m.abs().max(1.0)) {
                dropped.push(j);
                continue;
            }
            kept.push(j);
            mean.push(m);
            sd.push(s);
            data.extend(col.iter().map(|c| (c - m) / s));
        }
        Standardized {
            n,
            data,
            kept,
            mean,
            sd,
            dropped,
        }
    }

    #[inline]
    fn col(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    fn to_original(&self, beta: &[f64], ncols: usize) -> Vec<f64> {
        let mut out = vec![0.0; ncols + 1];
        out[0] = beta[0];
        for (k, &j) in self.kept.iter().enumerate() {
            let b = beta[k + 1] / self.sd[k];
            out[j + 1] = b;
            out[0] -= b * self.mean[k];
        }
        out
    }
}

// Proximal-Newton state: standardized coefficients and the linear predictor.
struct State {
    beta: Vec<f64>,
    eta: Vec<f64>,
}

impl State {
    fn new(std: &Standardized, tbar: f64) -> Self {
        let b0 = logit(tbar);
        let mut beta = vec![0.0; std.kept.len() + 1];
        beta[0] = b0;
        State {
            beta,
            eta: vec![b0; std.n],
        }
    }

    fn warm(&mut self, std: &Standardized, b: &[f64]) {
        self.beta[0] = b[0];
        for (k, &j) in std.kept.iter().enumerate() {
            self.beta[k + 1] = b[j + 1] * std.sd[k];
            self.beta[0] += b[j + 1] * std.mean[k];
        }
        self.refresh_eta(std);
    }

    fn objective(&self, t: &[f64], lambda: f64) -> f64 {
        let dev: f64 = t
            .iter()
            .zip(&self.eta)
            .map(|(&ti, &e)| deviance(ti, expit(e)))
            .sum();
        dev / (2.0 * t.len() as f64) + lambda * self.beta[1..].iter().map(|b| b.abs()).sum::<f64>()
    }

    fn refresh_eta(&mut self, std: &Standardized) {
        self.eta.fill(self.beta[0]);
        for k in 0..std.kept.len() {
            let bk = self.beta[k + 1];
            if bk != 0.0 {
                for (e, x) in self.eta.iter_mut().zip(std.col(k)) {
                    *e += bk * x;
                }
            }
        }
    }

    fn solve(&mut self, std: &Standardized, t: &[f64], lambda: f64, tol: f64) {
        let n = std.n;
        let nf = n as f64;
        let p = std.kept.len();
        let mut w = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut v = vec![0.0; p];
        let mut active: Vec<bool> = (0..p).map(|k| self.beta[k + 1] != 0.0).collect();

        for _outer in 0..100 {
            for i in 0..n {
                let mu = expit(self.eta[i]);
                w[i] = (mu * (1.0 - mu)).max(1e-5);
                r[i] = t[i] - mu;
            }
            let v0 = w.iter().sum::<f64>() / nf;
            for (k, vk) in v.iter_mut().enumerate() {
                *vk = std
                    .col(k)
                    .iter()
                    .zip(&w)
                    .map(|(x, wi)| wi * x * x)
                    .sum::<f64>()
                    / nf;
            }
            let mut outer_change = 0.0f64;
            let mut full_pass = true;
            for _pass in 0..10_000 {
                let mut max_change = 0.0f64;

                let d0 = r.iter().sum::<f64>() / nf / v0;
                if d0 != 0.0 {
                    self.beta[0] += d0;
                    for (ri, wi) in r.iter_mut().zip(&w) {
                        *ri -= wi * d0;
                    }
                    max_change = max_change.max(v0 * d0 * d0);
                }

                for k in 0..p {
                    if !full_pass && !active[k] {
                        continue;
                    }
                    let xk = std.col(k);
                    let old = self.beta[k + 1];
                    let g = dot(xk, &r) / nf + v[k] * old;
                    let new = soft_threshold(g, lambda) / v[k];
                    let d = new - old;
                    if d != 0.0 {
                        self.beta[k + 1] = new;
                        for ((ri, wi), x) in r.iter_mut().zip(&w).zip(xk) {
                            *ri -= wi * x * d;
                        }
                        max_change = max_change.max(v[k] * d * d);
                        if new != 0.0 {
                            active[k] = true;
                        }
                    }
                }
                outer_change = outer_change.max(max_change);

                if max_change < tol {
                    if full_pass {
                        break;
                    }
                    // confirm on every coordinate before leaving
                    full_pass = true;
                } else {
                    full_pass = false;
                }
            }
            self.refresh_eta(std);
            if outer_change < tol {
                break;
            }
        }
    }
}

// Eight independent partial sums so the reduction vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

#[inline]
fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}
