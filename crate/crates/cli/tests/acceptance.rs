//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Takes several minutes in release-like builds.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use attrib_core::estimators::{compute, influence_values, Estimator};
use attrib_core::nuisance::{
    cross_fit, fit_lasso_logistic, fit_logistic, fold_assignment, log_likelihood, NuisanceFit,
    NuisanceModel, PropensitySource,
};
use attrib_core::rng::Stream;
use attrib_core::sim::interstroke::{
    exposure_design, synthetic_interstroke, EXPOSURES, INTERSTROKE_ROWS,
};
use attrib_core::sim::{generate_case, registry, run_study, MetricsRow, StudyConfig};
use attrib_core::{efficiency_report_at, Dataset, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;

const N: usize = 2000;
const REPS: usize = 1000;

struct Outcome {
    failed: Vec<String>,
}

impl Outcome {
    fn record(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(name.to_string());
        }
    }
}

fn study(cases: &[u32], estimators: &[Estimator]) -> Vec<MetricsRow> {
    let cfg = StudyConfig {
        cases: cases.to_vec(),
        estimators: estimators.to_vec(),
        n_values: vec![N],
        reps: REPS,
        cache_truth: false,
        ..StudyConfig::default()
    };
    run_study(&cfg).expect("study runs")
}

fn row(rows: &[MetricsRow], case: u32, est: Estimator) -> &MetricsRow {
    rows.iter()
        .find(|r| r.case_id == case && r.estimator == est)
        .expect("cell present")
}

fn cell(r: &MetricsRow) -> String {
    let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.4}"));
    format!(
        "case {} {} bias {:.4} sse {:.4} ese {} cp95 {} failures {}",
        r.case_id,
        r.estimator,
        r.bias,
        r.sse,
        opt(r.ese),
        opt(r.cp95),
        r.failures
    )
}

fn in_cp_band(r: &MetricsRow) -> bool {
    r.cp95.is_some_and(|c| (0.93..=0.97).contains(&c))
}

fn main() {
    let mut out = Outcome { failed: Vec::new() };
    let t0 = Instant::now();

    let known = [
        Estimator::PnMono,
        Estimator::PnInde,
        Estimator::PnMonoKnownE,
        Estimator::PnIndeKnownE,
    ];
    let rows = study(&[1, 2, 3, 4], &known);

    let r = row(&rows, 1, Estimator::PnMono);
    let ratio = r.ese.unwrap_or(f64::NAN) / r.sse;
    let pass = r.bias.abs() <= 0.005
        && (r.sse - 0.027).abs() <= 0.2 * 0.027
        && (ratio - 1.0).abs() <= 0.15
        && in_cp_band(r)
        && r.valid();
    out.record(
        "case1-pn-mono",
        pass,
        format!("{}, ese/sse {ratio:.3}", cell(r)),
    );

    let mut pass = true;
    let mut detail = Vec::new();
    for (case, unknown, with_e) in [
        (1, Estimator::PnMono, Estimator::PnMonoKnownE),
        (2, Estimator::PnInde, Estimator::PnIndeKnownE),
        (3, Estimator::PnMono, Estimator::PnMonoKnownE),
        (4, Estimator::PnInde, Estimator::PnIndeKnownE),
    ] {
        let (u, k) = (row(&rows, case, unknown), row(&rows, case, with_e));
        pass &= k.sse <= 1.05 * u.sse && u.valid() && k.valid();
        detail.push(format!("case {case} {:.4} vs {:.4}", k.sse, u.sse));
    }
    out.record("known-propensity-sse", pass, detail.join("; "));

    let rows = study(&[6, 7], &[Estimator::PnMono]);
    let pass = [6, 7].iter().all(|&c| {
        let r = row(&rows, c, Estimator::PnMono);
        r.bias.abs() <= 0.01 && in_cp_band(r) && r.valid()
    });
    let detail = [6, 7]
        .map(|c| cell(row(&rows, c, Estimator::PnMono)))
        .join("; ");
    out.record("double-robustness", pass, detail);

    let rows = study(&[12, 15], &[Estimator::PnInde]);
    let pass = [12, 15].iter().all(|&c| {
        let r = row(&rows, c, Estimator::PnInde);
        r.bias.abs() <= 0.01 && r.valid()
    });
    let detail = [12, 15]
        .map(|c| cell(row(&rows, c, Estimator::PnInde)))
        .join("; ");
    out.record("single-robustness", pass, detail);

    let rows = study(
        &[17, 19],
        &[Estimator::PnMono, Estimator::PnOr, Estimator::PnIpw],
    );
    let (p17, or17, ipw17) = (
        row(&rows, 17, Estimator::PnMono),
        row(&rows, 17, Estimator::PnOr),
        row(&rows, 17, Estimator::PnIpw),
    );
    let (p19, or19) = (
        row(&rows, 19, Estimator::PnMono),
        row(&rows, 19, Estimator::PnOr),
    );
    let pass = (or17.bias + 0.050).abs() <= 0.015
        && p17.bias.abs() <= 0.01
        && p17.sse <= ipw17.sse
        && or19.bias.abs() >= 0.02
        && p19.bias.abs() <= 0.015
        && rows.iter().all(MetricsRow::valid);
    let detail = [p17, or17, ipw17, p19, or19].map(cell).join("; ");
    out.record("baseline-contrast", pass, detail);

    let (pass, detail) = property_suite();
    out.record("property-suite", pass, detail);

    let (pass, detail) = interstroke_end_to_end();
    out.record("interstroke-end-to-end", pass, detail);

    let (pass, detail) = simulate_determinism();
    out.record("simulate-determinism", pass, detail);

    println!(
        "acceptance: {} of 8 passed in {:.0} s",
        8 - out.failed.len(),
        t0.elapsed().as_secs_f64()
    );
    if !out.failed.is_empty() {
        println!("failed: {}", out.failed.join(", "));
        std::process::exit(1);
    }
}

// ---------- property suite ----------

struct Table {
    a: Vec<f64>,
    y: Vec<f64>,
    e: Vec<f64>,
    m0: Vec<f64>,
    m1: Vec<f64>,
}

impl Table {
    fn random(rng: &mut impl Rng) -> Table {
        let n = rng.random_range(4..80);
        let mut t = Table {
            a: vec![],
            y: vec![],
            e: vec![],
            m0: vec![],
            m1: vec![],
        };
        for _ in 0..n {
            t.a.push(rng.random_range(0..2) as f64);
            t.y.push(rng.random_range(0..2) as f64);
            t.e.push(rng.random_range(0.01..0.99));
            t.m0.push(rng.random::<f64>());
            t.m1.push(rng.random_range(0.01..1.0));
        }
        t
    }

    fn dataset(&self) -> Dataset {
        Dataset::new(
            Matrix::zeros(self.a.len(), 0),
            self.a.clone(),
            self.y.clone(),
        )
        .unwrap()
    }

    fn fit(&self, est: Estimator) -> NuisanceFit {
        let src = if est.requires_known_e() {
            PropensitySource::Known
        } else {
            PropensitySource::Estimated
        };
        NuisanceFit::from_parts(
            self.e.clone(),
            self.m0.clone(),
            self.m1.clone(),
            src,
            vec![0; self.a.len()],
        )
    }

    fn mirrored(&self) -> Table {
        let flip = |v: &[f64]| v.iter().map(|x| 1.0 - x).collect();
        Table {
            a: flip(&self.a),
            y: flip(&self.y),
            e: flip(&self.e),
            m0: flip(&self.m1),
            m1: flip(&self.m0),
        }
    }
}

const PLUGIN: [Estimator; 6] = [
    Estimator::PnMono,
    Estimator::PnInde,
    Estimator::PnMonoKnownE,
    Estimator::PnIndeKnownE,
    Estimator::PsMono,
    Estimator::PsInde,
];

fn property_suite() -> (bool, String) {
    let mut rng = Stream::new(424242).rng();
    let mut worst_eif = 0.0f64;
    let mut worst_sym = 0.0f64;
    let mut gaps_ok = true;
    let mut checked = 0usize;
    for _ in 0..1000 {
        let t = Table::random(&mut rng);
        let d = t.dataset();
        for est in PLUGIN {
            let nf = t.fit(est);
            let Ok(r) = compute(est, &d, &nf) else {
                continue;
            };
            let iv = influence_values(est, &d, &nf, r.value).unwrap();
            let mean = iv.values.iter().map(|z| z - r.value).sum::<f64>() / d.n() as f64;
            worst_eif = worst_eif.max(mean.abs());
            checked += 1;
        }
        let m = t.mirrored();
        let dm = m.dataset();
        for (pn, ps) in [
            (Estimator::PnMono, Estimator::PsMono),
            (Estimator::PnInde, Estimator::PsInde),
            (Estimator::PnMonoKnownE, Estimator::PsMonoKnownE),
            (Estimator::PnIndeKnownE, Estimator::PsIndeKnownE),
        ] {
            match (compute(pn, &d, &t.fit(pn)), compute(ps, &dm, &m.fit(ps))) {
                (Ok(a), Ok(b)) => {
                    worst_sym = worst_sym.max((a.value - b.value).abs() / (1.0 + a.value.abs()))
                }
                (Err(_), Err(_)) => {}
                _ => worst_sym = f64::INFINITY,
            }
        }
        let beta = rng.random_range(-0.5..1.5);
        let rep = efficiency_report_at(&d, &t.fit(Estimator::PnMono), beta).unwrap();
        let fields = [
            rep.bound_mono_unknown,
            rep.bound_inde_unknown,
            rep.bound_mono_known,
            rep.bound_inde_known,
            rep.gap_assumption,
            rep.gap_known_e_mono,
            rep.gap_known_e_inde,
        ];
        let identity = rep.bound_mono_unknown - rep.bound_inde_unknown - rep.gap_assumption;
        gaps_ok &= fields.iter().all(|&v| v >= 0.0)
            && identity.abs() <= 1e-9 * (1.0 + rep.bound_mono_unknown);
    }

    let purity = crossfit_purity();
    let ll_gap = logistic_oracle_gap();
    let kkt = lasso_kkt();
    let pass = worst_eif <= 1e-10
        && worst_sym <= 1e-12
        && gaps_ok
        && purity
        && ll_gap <= 1e-6
        && kkt < 1e-5;
    let detail = format!(
        "eif mean max {worst_eif:.1e} over {checked} fits; symmetry max {worst_sym:.1e}; gaps non-negative {gaps_ok}; \
         cross-fit purity {purity}; logistic LL gap {ll_gap:.1e}; lasso KKT violation {kkt:.1e}"
    );
    (pass, detail)
}

fn crossfit_purity() -> bool {
    let g = generate_case(&registry(3).unwrap(), 400, 8).unwrap();
    let d = &g.dataset;
    let folds = fold_assignment(d.n(), 5, 99);
    let base = cross_fit(d, 5, NuisanceModel::logistic(), None, 99).unwrap();
    let mut sizes = [0usize; 5];
    folds.iter().for_each(|&f| sizes[f] += 1);
    if base.fold_id != folds || sizes.iter().any(|&s| s != 80) {
        return false;
    }
    [0usize, 57, 311].iter().all(|&i| {
        let mut a = d.a().to_vec();
        let mut y = d.y().to_vec();
        a[i] = 1.0 - a[i];
        y[i] = 1.0 - y[i];
        let dp = Dataset::new(d.x().clone(), a, y).unwrap();
        let p = cross_fit(&dp, 5, NuisanceModel::logistic(), None, 99).unwrap();
        (0..d.n()).filter(|&j| folds[j] == folds[i]).all(|j| {
            p.e_hat[j] == base.e_hat[j]
                && p.mu0_hat[j] == base.mu0_hat[j]
                && p.mu1_hat[j] == base.mu1_hat[j]
        })
    })
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn linear(b: &[f64], r: &[f64]) -> f64 {
    b[0] + r.iter().zip(&b[1..]).map(|(x, c)| x * c).sum::<f64>()
}

/// |LL(library) - LL(gradient ascent)| on Case 1 data, n = 200.
fn logistic_oracle_gap() -> f64 {
    let g = generate_case(&registry(1).unwrap(), 200, 17).unwrap();
    let (x, t) = (g.dataset.x(), g.dataset.a());
    let n = x.nrows() as f64;
    let ll = |b: &[f64]| {
        (0..x.nrows())
            .map(|i| {
                let z = linear(b, x.row(i));
                t[i] * z - (1.0 + z.exp()).ln()
            })
            .sum::<f64>()
            / n
    };
    let mut b = vec![0.0; x.ncols() + 1];
    let mut step = 1.0;
    for _ in 0..200_000 {
        let mut grad = vec![0.0; b.len()];
        for (i, ti) in t.iter().enumerate() {
            let res = ti - sigmoid(linear(&b, x.row(i)));
            grad[0] += res / n;
            for (gj, xj) in grad[1..].iter_mut().zip(x.row(i)) {
                *gj += res * xj / n;
            }
        }
        let gn2: f64 = grad.iter().map(|v| v * v).sum();
        if gn2.sqrt() < 1e-11 {
            break;
        }
        let cur = ll(&b);
        step *= 2.0;
        loop {
            let cand: Vec<f64> = b.iter().zip(&grad).map(|(bi, gi)| bi + step * gi).collect();
            if ll(&cand) >= cur + 0.5 * step * gn2 || step < 1e-12 {
                b = cand;
                break;
            }
            step *= 0.5;
        }
    }
    let fit = fit_logistic(x, t, 0.0).unwrap();
    (log_likelihood(x, t, &fit.coefficients) - log_likelihood(x, t, &b)).abs()
}

/// Worst subgradient-condition violation of the CV-selected LASSO fit on
/// 5 informative + 15 noise columns, n = 1000.
fn lasso_kkt() -> f64 {
    let (n, p) = (1000, 20);
    let mut rng = Stream::new(5).rng();
    let beta = [1.0, -0.8, 0.6, 0.4, -0.3];
    let mut xs = Vec::new();
    let mut t = Vec::new();
    for _ in 0..n {
        let row: Vec<f64> = (0..p)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let z = -0.3 + (0..5).map(|j| beta[j] * row[j]).sum::<f64>();
        t.push((rng.random::<f64>() < sigmoid(z)) as u8 as f64);
        xs.extend(row);
    }
    let x = Matrix::from_row_major(n, p, xs);
    let m = fit_lasso_logistic(&x, &t, 100, 5).unwrap();
    let resid: Vec<f64> = (0..n)
        .map(|i| t[i] - sigmoid(linear(&m.coefficients, x.row(i))))
        .collect();
    let nf = n as f64;
    let mut worst = (resid.iter().sum::<f64>() / nf).abs();
    for j in 0..p {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / nf;
        let sd = (col.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / nf).sqrt();
        let g = resid
            .iter()
            .zip(&col)
            .map(|(r, c)| r * (c - mean))
            .sum::<f64>()
            / nf
            / sd;
        let b = m.coefficients[j + 1];
        let v = if b == 0.0 {
            (g.abs() - m.lambda).max(0.0)
        } else {
            (g - m.lambda * b.signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

// ---------- CLI runs ----------

fn attrib() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_attrib"));
    c.env("RUST_LOG", "off");
    c
}

fn interstroke_csv(scratch: &Path) -> PathBuf {
    let bundled =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/interstroke_synthetic.csv");
    if bundled.exists() {
        return bundled;
    }
    let path = scratch.join("interstroke_synthetic.csv");
    synthetic_interstroke(INTERSTROKE_ROWS / 2, 20240101)
        .write_csv(&path)
        .expect("synthetic table written");
    path
}

fn p_value_finite(line: &str) -> bool {
    if line.trim_end().ends_with("< 0.001") {
        return true;
    }
    line.split_whitespace()
        .last()
        .and_then(|s| s.parse::<f64>().ok())
        .is_some_and(f64::is_finite)
}

fn interstroke_end_to_end() -> (bool, String) {
    let scratch = tempfile::tempdir().unwrap();
    let csv = interstroke_csv(scratch.path());
    let start = Instant::now();
    let mut pass = true;
    let mut rows = 0usize;
    let mut table = String::new();
    for exposure in EXPOSURES {
        let design = exposure_design(exposure).unwrap();
        let interactions = format!(
            "cont={};disc={}",
            design.continuous.join(","),
            design.discrete.join(",")
        );
        let o = attrib()
            .args([
                "estimate",
                "--data",
                csv.to_str().unwrap(),
                "--treatment",
                exposure,
                "--outcome",
                "case",
            ])
            .args(["--covariates", &design.covariates.join(",")])
            .args([
                "--nuisance",
                "lasso",
                "--method",
                "proposed,or,ipw",
                "--bootstrap",
                "200",
            ])
            .args(["--interactions", &interactions, "--format", "summary"])
            .output()
            .expect("binary runs");
        let text = String::from_utf8_lossy(&o.stdout).to_string();
        if !o.status.success() {
            return (
                false,
                format!("{exposure}: exit {:?}: {text}", o.status.code()),
            );
        }
        let lines: Vec<&str> = text.lines().collect();
        let header: Vec<&str> = lines
            .get(1)
            .map(|l| l.split_whitespace().collect())
            .unwrap_or_default();
        pass &= header == ["method", "pn.est", "ESE", "p-value"];
        pass &= lines.len() == 5;
        for (line, method) in lines.iter().skip(2).zip(["proposed", "or", "ipw"]) {
            pass &= line.starts_with(method) && p_value_finite(line);
            rows += 1;
        }
        table.push_str(&text);
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 15.0 * 60.0 && rows == 18;
    print!("{table}");
    (
        pass,
        format!("6 exposures, {rows} method rows, B = 200, {secs:.0} s"),
    )
}

fn simulate_determinism() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str, name: &str| -> Vec<u8> {
        let path = dir.path().join(name);
        let o = attrib()
            .args([
                "simulate",
                "--cases",
                "1,2,17",
                "--estimators",
                "pn_mono,pn_inde,pn_or",
            ])
            .args(["--known-propensity", "--n", "300,600", "--reps", "60"])
            .args([
                "--truth-samples",
                "200000",
                "--no-cache",
                "--workers",
                workers,
            ])
            .args(["--out", path.to_str().unwrap()])
            .output()
            .expect("binary runs");
        assert!(o.status.success(), "simulate failed");
        std::fs::read(path).unwrap()
    };
    let w1 = run("1", "w1.csv");
    let w2 = run("2", "w2.csv");
    let again = run("2", "w2b.csv");
    let pass = w1 == w2 && w2 == again && !w1.is_empty();
    let lines = String::from_utf8_lossy(&w1).lines().count() - 1;
    (
        pass,
        format!(
            "{lines} rows; workers 1 vs 2 identical {}, repeat identical {}",
            w1 == w2,
            w2 == again
        ),
    )
}
