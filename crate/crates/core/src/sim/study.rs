use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::dgp::{generate_from, registry, DgpSpec};
use super::truth::{true_value, true_value_cached, DEFAULT_TRUTH_SAMPLES};
use crate::error::{Error, Result};
use crate::estimators::{compute, Estimator};
use crate::nuisance::{cross_fit, NuisanceModel};
use crate::rng::{stage, Stream};

/// Cells with a larger share of failed replications are flagged invalid.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub cases: Vec<u32>,
    pub estimators: Vec<Estimator>,
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub folds: usize,
    pub seed: u64,
    pub truth_samples: usize,
    /// Read and write the on-disk truth cache.
    pub cache_truth: bool,
    /// Thread count; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Use the 2-dimensional reading for cases 8 and 14.
    pub case8_two_dim: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            cases: vec![1],
            estimators: vec![Estimator::PnMono],
            n_values: vec![500, 1000, 2000],
            reps: 1000,
            folds: 5,
            seed: 20240101,
            truth_samples: DEFAULT_TRUTH_SAMPLES,
            cache_truth: true,
            workers: None,
            case8_two_dim: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub case_id: u32,
    pub estimator: Estimator,
    pub n: usize,
    pub reps: usize,
    pub truth: f64,
    pub bias: f64,
    pub sse: f64,
    /// Mean plug-in standard error; `None` for estimators without one.
    pub ese: Option<f64>,
    pub cp95: Option<f64>,
    pub failures: usize,
}

impl MetricsRow {
    pub fn valid(&self) -> bool {
        (self.failures as f64) <= MAX_FAILURE_RATE * self.reps as f64
    }
}

pub const METRICS_HEADER: &str = "case,estimator,n,reps,bias,sse,ese,cp95,failures";

fn spec_for(case: u32, cfg: &StudyConfig) -> Result<DgpSpec> {
    if cfg.case8_two_dim && (case == 8 || case == 14) {
        super::dgp::case8_two_dim(case)
    } else {
        registry(case)
    }
}

/// One replication: estimate and optional SE per estimator, `None` on failure.
type RepResult = Vec<Option<(f64, Option<f64>)>>;

fn replicate(spec: &DgpSpec, n: usize, r: usize, cfg: &StudyConfig) -> RepResult {
    let k = cfg.estimators.len();
    let stream =
        Stream::new(cfg.seed).path(&[stage::DATA, spec.case_id as u64, n as u64, r as u64]);
    let Ok(g) = generate_from(spec, n, &stream) else {
        return vec![None; k];
    };
    let fold_seed = stream.child(stage::FOLDS).key();
    let all_known = cfg.estimators.iter().all(|e| e.requires_known_e());
    let known = all_known.then_some(g.truth.e.as_slice());
    let Ok(nf) = cross_fit(
        &g.dataset,
        cfg.folds,
        NuisanceModel::logistic(),
        known,
        fold_seed,
    ) else {
        return vec![None; k];
    };
    let nf_known = if cfg.estimators.iter().any(|e| e.requires_known_e()) {
        nf.with_known_propensity(&g.truth.e).ok()
    } else {
        None
    };
    cfg.estimators
        .iter()
        .map(|&est| {
            let fit = if est.requires_known_e() {
                nf_known.as_ref()?
            } else {
                &nf
            };
            compute(est, &g.dataset, fit).ok().map(|e| (e.value, e.se))
        })
        .collect()
}

/// Runs every (case, n) cell and returns rows ordered by case, estimator, n.
pub fn run_study(cfg: &StudyConfig) -> Result<Vec<MetricsRow>> {
    if cfg.reps == 0 {
        return Err(Error::Argument("reps must be at least 1".into()));
    }
    if cfg.estimators.is_empty() || cfg.n_values.is_empty() || cfg.cases.is_empty() {
        return Err(Error::Argument(
            "cases, estimators and n values must be non-empty".into(),
        ));
    }
    match cfg.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
            pool.install(|| run_cells(cfg))
        }
        None => run_cells(cfg),
    }
}

fn run_cells(cfg: &StudyConfig) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for &case in &cfg.cases {
        let spec = spec_for(case, cfg)?;
        let mut truths = BTreeMap::new();
        for est in &cfg.estimators {
            let estimand = est.estimand();
            if let std::collections::btree_map::Entry::Vacant(v) = truths.entry(estimand as u8) {
                let t = if cfg.cache_truth {
                    true_value_cached(&spec, estimand, cfg.truth_samples, cfg.seed)?
                } else {
                    true_value(&spec, estimand, cfg.truth_samples, cfg.seed)?
                };
                v.insert(t);
            }
        }
        let mut cell_rows: Vec<MetricsRow> = Vec::new();
        for &n in &cfg.n_values {
            let reps: Vec<RepResult> = (0..cfg.reps)
                .into_par_iter()
                .map(|r| replicate(&spec, n, r, cfg))
                .collect();
            for (j, &est) in cfg.estimators.iter().enumerate() {
                let truth = truths[&(est.estimand() as u8)];
                cell_rows.push(summarize(
                    case,
                    est,
                    n,
                    truth,
                    reps.iter().map(|rep| rep[j]),
                    cfg.reps,
                ));
            }
        }
        cell_rows.sort_by_key(|r| (cfg.estimators.iter().position(|&e| e == r.estimator), r.n));
        for r in &cell_rows {
            if !r.valid() {
                log::warn!(
                    "case {} {} n={}: {} of {} replications failed, cell invalid",
                    r.case_id,
                    r.estimator,
                    r.n,
                    r.failures,
                    r.reps
                );
            }
        }
        rows.extend(cell_rows);
    }
    Ok(rows)
}

fn summarize(
    case_id: u32,
    estimator: Estimator,
    n: usize,
    truth: f64,
    results: impl Iterator<Item = Option<(f64, Option<f64>)>>,
    reps: usize,
) -> MetricsRow {
    let ok: Vec<(f64, Option<f64>)> = results.flatten().collect();
    let m = ok.len() as f64;
    let mean = ok.iter().map(|r| r.0).sum::<f64>() / m;
    let sse = if ok.len() > 1 {
        (ok.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    let has_se = estimator.has_plugin_se() && !ok.is_empty() && ok.iter().all(|r| r.1.is_some());
    let (ese, cp95) = if has_se {
        let ses = ok.iter().map(|r| r.1.unwrap());
        let ese = ses.clone().sum::<f64>() / m;
        let covered = ok
            .iter()
            .filter(|(v, se)| {
                let h = crate::estimators::Z95 * se.unwrap();
                v - h <= truth && truth <= v + h
            })
            .count();
        (Some(ese), Some(covered as f64 / m))
    } else {
        (None, None)
    };
    MetricsRow {
        case_id,
        estimator,
        n,
        reps,
        truth,
        bias: mean - truth,
        sse,
        ese,
        cp95,
        failures: reps - ok.len(),
    }
}

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.case_id,
            r.estimator,
            r.n,
            r.reps,
            r.bias,
            r.sse,
            opt(r.ese),
            opt(r.cp95),
            r.failures
        );
    }
    out
}

pub fn write_metrics_csv(rows: &[MetricsRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, metrics_to_csv(rows)).map_err(|e| Error::io(path, e))
}

/// Parses a file written by [`write_metrics_csv`]. The truth column is not
/// stored, so `truth` is NaN in the result.
pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != METRICS_HEADER {
        return Err(Error::Schema(format!("expected header `{METRICS_HEADER}`")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |m: &str| Error::Parse {
            row: i + 1,
            message: m.to_string(),
        };
        let num = |j: usize| {
            rec[j]
                .parse::<f64>()
                .map_err(|_| bad(&format!("bad number `{}`", &rec[j])))
        };
        let opt = |j: usize| {
            if &rec[j] == "NA" {
                Ok(None)
            } else {
                num(j).map(Some)
            }
        };
        let int = |j: usize| {
            rec[j]
                .parse::<usize>()
                .map_err(|_| bad(&format!("bad count `{}`", &rec[j])))
        };
        rows.push(MetricsRow {
            case_id: rec[0].parse().map_err(|_| bad("bad case id"))?,
            estimator: rec[1].parse().map_err(|_| bad("unknown estimator"))?,
            n: int(2)?,
            reps: int(3)?,
            truth: f64::NAN,
            bias: num(4)?,
            sse: num(5)?,
            ese: opt(6)?,
            cp95: opt(7)?,
            failures: int(8)?,
        });
    }
    Ok(rows)
}

/// Aligned text table: one line per (case, estimator), one Bias/SSE/ESE/CP95
/// block per sample size.
pub fn render_report(rows: &[MetricsRow]) -> String {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut keys: Vec<(u32, Estimator)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.case_id, r.estimator)) {
            keys.push((r.case_id, r.estimator));
        }
    }
    let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.3}"));
    let mut out = String::new();
    let _ = write!(out, "{:<6} {:<16}", "", "");
    for n in &ns {
        let _ = write!(out, " | {:^31}", format!("n = {n}"));
    }
    out.push('\n');
    let _ = write!(out, "{:<6} {:<16}", "Case", "Estimator");
    for _ in &ns {
        let _ = write!(
            out,
            " | {:>7} {:>7} {:>7} {:>7}",
            "Bias", "SSE", "ESE", "CP95"
        );
    }
    out.push('\n');
    for (case, est) in keys {
        let _ = write!(out, "{:<6} {:<16}", case, est.name());
        for &n in &ns {
            match rows
                .iter()
                .find(|r| r.case_id == case && r.estimator == est && r.n == n)
            {
                Some(r) => {
                    let flag = if r.valid() { "" } else { "*" };
                    let _ = write!(
                        out,
                        " | {:>7} {:>7} {:>7} {:>7}{flag}",
                        f(Some(r.bias)),
                        f(Some(r.sse)),
                        f(r.ese),
                        f(r.cp95)
                    );
                }
                None => {
                    let _ = write!(out, " | {:>7} {:>7} {:>7} {:>7}", "", "", "", "");
                }
            }
        }
        out.push('\n');
    }
    out.push_str(
        "Bias and SSE: mean and standard deviation of the estimates; ESE: mean estimated standard error;\n\
         CP95: coverage proportion of 95% confidence intervals. * marks cells with more than 5% failed replications.\n",
    );
    out
}
