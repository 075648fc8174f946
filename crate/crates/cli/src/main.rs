use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use attrib_core::efficiency::efficiency_report;
use attrib_core::estimators::{
    estimate, Assumption, Estimand, Estimate, EstimateConfig, Estimator, Method,
};
use attrib_core::nuisance::{CrossFitOptions, NuisanceModel, DEFAULT_CLIP};
use attrib_core::sim::{
    case8_two_dim, metrics_to_csv, read_metrics_csv, registry, render_report, run_study,
    true_value_cached, StudyConfig, DEFAULT_TRUTH_SAMPLES,
};
use attrib_core::{csv_header, load_csv_with, CsvColumns, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

const DEFAULT_SEED: u64 = 20240101;

#[derive(Parser)]
#[command(
    name = "attrib",
    version,
    about = "Probabilities of necessary and sufficient causation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate PN or PS from a CSV file.
    Estimate(EstimateArgs),
    /// Run a Monte-Carlo study and write the metrics table as CSV.
    Simulate(SimulateArgs),
    /// Monte-Carlo true value of PN or PS for a simulation case.
    Truth(TruthArgs),
    /// Render a metrics CSV as an aligned table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimandArg {
    Pn,
    Ps,
}

impl From<EstimandArg> for Estimand {
    fn from(v: EstimandArg) -> Self {
        match v {
            EstimandArg::Pn => Estimand::Pn,
            EstimandArg::Ps => Estimand::Ps,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AssumptionArg {
    Mono,
    Inde,
}

#[derive(Clone, Copy, ValueEnum)]
enum NuisanceArg {
    Logistic,
    Lasso,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Proposed,
    Ipw,
    Or,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
    /// Aligned `method pn.est ESE p-value` table.
    Summary,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    treatment: String,
    #[arg(long)]
    outcome: String,
    /// Comma-separated covariate columns [default: every other column]
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "pn")]
    estimand: EstimandArg,
    #[arg(long, value_enum, default_value = "mono")]
    assumption: AssumptionArg,
    /// Column holding known propensity scores; selects the known-propensity estimators
    #[arg(long)]
    known_propensity_col: Option<String>,
    #[arg(long, value_enum, default_value = "logistic")]
    nuisance: NuisanceArg,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Bootstrap replicates for estimators without a plug-in standard error (0 disables)
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    /// Comma-separated estimators to report
    #[arg(long, value_enum, value_delimiter = ',', default_value = "proposed")]
    method: Vec<MethodArg>,
    /// Product terms to add, e.g. `cont=age,whr;disc=sex,region`
    #[arg(long)]
    interactions: Option<String>,
    /// Estimated propensities are clipped to [clip, 1 - clip]
    #[arg(long, default_value_t = DEFAULT_CLIP)]
    clip: f64,
    /// Include efficiency-bound diagnostics (PN only)
    #[arg(long)]
    diagnostics: bool,
    /// Write the cross-fitted nuisance predictions to this CSV
    #[arg(long)]
    nuisance_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Case ids, e.g. `1,2` or `1-4,17`
    #[arg(long, value_parser = parse_cases, default_value = "1")]
    cases: CaseList,
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator, default_value = "pn_mono")]
    estimators: Vec<Estimator>,
    #[arg(long = "n", value_delimiter = ',', default_value = "500,1000,2000")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Also run the known-propensity counterpart of every proposed estimator
    #[arg(long)]
    known_propensity: bool,
    /// Worker threads [default: available parallelism]; output does not depend on it
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TRUTH_SAMPLES)]
    truth_samples: usize,
    /// Skip the on-disk truth cache
    #[arg(long)]
    no_cache: bool,
    /// Use the 2-dimensional reading of cases 8 and 14
    #[arg(long)]
    case8_two_dim: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TruthArgs {
    #[arg(long, value_parser = parse_case)]
    case: u32,
    #[arg(long, value_enum, default_value = "pn")]
    estimand: EstimandArg,
    #[arg(long, default_value_t = DEFAULT_TRUTH_SAMPLES)]
    samples: usize,
    #[arg(long)]
    case8_two_dim: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Clone)]
struct CaseList(Vec<u32>);

fn parse_case(s: &str) -> Result<u32, String> {
    let c: u32 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a case id"))?;
    registry(c).map(|_| c).map_err(|e| e.to_string())
}

fn parse_cases(s: &str) -> Result<CaseList, String> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi) = (parse_case(lo)?, parse_case(hi)?);
                if lo > hi {
                    return Err(format!("empty case range `{part}`"));
                }
                out.extend(lo..=hi);
            }
            None => out.push(parse_case(part)?),
        }
    }
    if out.is_empty() {
        return Err("no cases given".into());
    }
    Ok(CaseList(out))
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    s.trim().parse().map_err(|e: Error| e.to_string())
}

/// `cont=a,b;disc=c,d`
fn parse_interactions(s: &str) -> Result<(Vec<String>, Vec<String>), Error> {
    let mut cont = None;
    let mut disc = None;
    for part in s.split(';').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Argument(format!("bad interactions part `{part}`")))?;
        let cols: Vec<String> = v
            .split(',')
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();
        match k.trim() {
            "cont" => cont = Some(cols),
            "disc" => disc = Some(cols),
            other => {
                return Err(Error::Argument(format!(
                    "unknown interactions key `{other}`"
                )))
            }
        }
    }
    match (cont, disc) {
        (Some(c), Some(d)) => Ok((c, d)),
        _ => Err(Error::Argument(
            "interactions need both cont= and disc=".into(),
        )),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })
        }
    }
}

fn p_text(p: Option<f64>) -> String {
    match p {
        Some(p) if p < 0.001 => "< 0.001".into(),
        Some(p) => format!("{p:.3}"),
        None => "NA".into(),
    }
}

fn summary_table(estimand: Estimand, estimates: &[Estimate], label: &str, seed: u64) -> String {
    let head = format!("{estimand}.est");
    let mut s = format!(
        "{label} (seed {seed})\n{:<10} {:>8} {:>8} {:>9}\n",
        "method", head, "ESE", "p-value"
    );
    for e in estimates {
        let se = e.se.map_or_else(|| "NA".into(), |v| format!("{v:.3}"));
        s.push_str(&format!(
            "{:<10} {:>8.3} {:>8} {:>9}\n",
            e.method.to_string(),
            e.value,
            se,
            p_text(e.p_value)
        ));
    }
    s
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), Error> {
    let header = csv_header(&args.data)?;
    let covariates = match &args.covariates {
        Some(c) => c.clone(),
        None => header
            .iter()
            .filter(|h| {
                **h != args.treatment
                    && **h != args.outcome
                    && Some(*h) != args.known_propensity_col.as_ref()
            })
            .cloned()
            .collect(),
    };
    let load = load_csv_with(
        &args.data,
        &CsvColumns {
            treatment: args.treatment.clone(),
            outcome: args.outcome.clone(),
            covariates,
            extra: args.known_propensity_col.iter().cloned().collect(),
        },
    )?;
    let mut d = load.dataset;
    if let Some(spec) = &args.interactions {
        let (cont, disc) = parse_interactions(spec)?;
        let cont: Vec<&str> = cont.iter().map(String::as_str).collect();
        let disc: Vec<&str> = disc.iter().map(String::as_str).collect();
        d = d.expand_interactions(&cont, &disc)?;
    }
    let known_e = load.extra.into_iter().next();

    let model = match args.nuisance {
        NuisanceArg::Logistic => NuisanceModel::logistic(),
        NuisanceArg::Lasso => NuisanceModel::lasso(),
    };
    let mut methods: Vec<Method> = Vec::new();
    for m in &args.method {
        let m = match m {
            MethodArg::Proposed => Method::Proposed,
            MethodArg::Ipw => Method::Ipw,
            MethodArg::Or => Method::Or,
        };
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    let estimand: Estimand = args.estimand.into();
    let cfg = EstimateConfig {
        estimand,
        assumption: match args.assumption {
            AssumptionArg::Mono => Assumption::Monotonicity,
            AssumptionArg::Inde => Assumption::CondIndependence,
        },
        methods,
        crossfit: CrossFitOptions {
            folds: args.folds,
            model,
            clip: args.clip,
            seed: args.seed,
        },
        bootstrap: args.bootstrap,
        seed: args.seed,
    };
    let run = estimate(&d, known_e.as_deref(), &cfg)?;
    if let Some(p) = &args.nuisance_out {
        run.nuisance.write_csv(p)?;
    }
    let text = match args.format {
        Format::Json => {
            let mut v = json!({
                "seed": args.seed,
                "n": d.n(),
                "covariates": d.p(),
                "dropped_rows": load.dropped_rows,
                "estimates": run.estimates.iter().map(Estimate::to_json).collect::<Vec<_>>(),
                "nuisance_warnings": run.nuisance.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
            });
            if args.diagnostics && estimand == Estimand::Pn {
                v["efficiency"] = efficiency_report(&d, &run.nuisance)?.to_json();
            }
            serde_json::to_string_pretty(&v).expect("json") + "\n"
        }
        Format::Csv => {
            let mut s = format!("{},seed\n", Estimate::CSV_HEADER);
            for e in &run.estimates {
                s.push_str(&format!("{},{}\n", e.to_csv_row(), args.seed));
            }
            s
        }
        Format::Summary => summary_table(estimand, &run.estimates, &args.treatment, args.seed),
    };
    emit(&args.out, &text)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut estimators = args.estimators.clone();
    if args.known_propensity {
        for e in &args.estimators {
            if let Some(k) = e.with_known_e() {
                if !estimators.contains(&k) {
                    estimators.push(k);
                }
            }
        }
    }
    let cfg = StudyConfig {
        cases: args.cases.0,
        estimators,
        n_values: args.n,
        reps: args.reps,
        folds: args.folds,
        seed: args.seed,
        truth_samples: args.truth_samples,
        cache_truth: !args.no_cache,
        workers: args.workers,
        case8_two_dim: args.case8_two_dim,
    };
    eprintln!("attrib simulate: seed {}", args.seed);
    let rows = run_study(&cfg)?;
    emit(&args.out, &metrics_to_csv(&rows))
}

fn cmd_truth(args: TruthArgs) -> Result<(), Error> {
    let spec = if args.case8_two_dim {
        case8_two_dim(args.case)?
    } else {
        registry(args.case)?
    };
    eprintln!("attrib truth: seed {}", args.seed);
    let v = true_value_cached(&spec, args.estimand.into(), args.samples, args.seed)?;
    emit(&None, &format!("{v}\n"))
}

fn cmd_report(args: ReportArgs) -> Result<(), Error> {
    let rows = read_metrics_csv(&args.input)?;
    emit(&None, &render_report(&rows))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Truth(a) => cmd_truth(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let v = json!({"error": {"code": e.code(), "message": e.to_string()}});
            println!("{v}");
            ExitCode::from(1)
        }
    }
}
