//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a configured threshold failed, 2 usage or input
//! error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bands::{build_band, gaussian_max_quantile, QuantileSpec};
use crate::binomial::{binomial_ratio_sweep, default_sweep};
use crate::estimators::{
    fit, sigma2_global, sigma2_local, tau_oracle, tau_plugin, Dataset, VarianceMode, VarianceModel,
    DEFAULT_VARIANCE_FLOOR,
};
use crate::grid::Grid;
use crate::simulation::experiments::{ExperimentReport, Runner, Summary};
use crate::simulation::scenario::{CovariateSpec, Covariates, NoiseSpec, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_THRESHOLD: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Supported value of the `schema` field in JSON inputs.
pub const SCHEMA_VERSION: u64 = 1;

/// Environment variable overriding `--workers`.
pub const THREADS_ENV: &str = "HISTOBAND_THREADS";

#[derive(Debug, Parser)]
#[command(name = "histoband", version, about = "Histogram regression with uniform confidence bands")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the histogram estimator to a CSV sample.
    Fit(FitArgs),
    /// Build a confidence band from a CSV sample.
    Band(BandArgs),
    /// Print the Gaussian-max quantile c(β) for J cells.
    Quantile(QuantileArgs),
    /// Run a Monte Carlo experiment or the binomial moment sweep.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with header x1,...,xp,y.
    pub csv: PathBuf,
    #[arg(long)]
    pub inv_mesh: u64,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VarianceArg {
    Global,
    Local,
    Oracle,
}

#[derive(Debug, Args)]
pub struct BandArgs {
    pub csv: PathBuf,
    #[arg(long)]
    pub inv_mesh: u64,
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = VarianceArg::Global)]
    pub variance: VarianceArg,
    /// JSON with the covariate and noise laws; required for `--variance oracle`.
    #[arg(long)]
    pub oracle_spec: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_VARIANCE_FLOOR)]
    pub variance_floor: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the band as plot-ready CSV.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuantileArgs {
    #[arg(long)]
    pub cells: usize,
    #[arg(long)]
    pub beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Coverage,
    Rate,
    GaussApprox,
    Phat,
    ApproxError,
    VerifyBinomial,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub experiment: Experiment,
    /// Run configuration; optional for `verify-binomial`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write per-replication records as CSV.
    #[arg(long)]
    pub records_csv: Option<PathBuf>,
}

/// Thresholds checked after a run; unset thresholds are not asserted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub min_coverage: Option<f64>,
    /// `|slope − target| ≤ tolerance`.
    pub slope: Option<SlopeThreshold>,
    pub max_ks_distance: Option<f64>,
    pub phat_decreasing: Option<bool>,
    pub within_bound: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeThreshold {
    pub target: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinomialSweepConfig {
    pub n_values: Vec<u64>,
    pub p_values: Vec<f64>,
    pub q_values: Vec<u32>,
}

/// JSON document passed to `simulate --config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub schema: u64,
    #[serde(default)]
    pub scenario: Option<ScenarioConfig>,
    /// Sample sizes for `rate` and `phat`.
    #[serde(default)]
    pub sample_sizes: Vec<usize>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub binomial: Option<BinomialSweepConfig>,
}

/// JSON document passed to `band --oracle-spec`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpecFile {
    pub schema: u64,
    #[serde(default)]
    pub covariates: CovariateSpec,
    pub noise: NoiseSpec,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Threshold(String),
}

type Outcome = std::result::Result<(), Failure>;

fn input(msg: impl std::fmt::Display) -> Failure {
    Failure::Input(msg.to_string())
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Band(a) => cmd_band(&a),
        Command::Quantile(a) => cmd_quantile(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INPUT
        }
        Err(Failure::Threshold(msg)) => {
            eprintln!("threshold failed: {msg}");
            EXIT_THRESHOLD
        }
    }
}

/// A CSV sample; `data` is `None` when the file has a header but no rows.
pub struct CsvSample {
    pub dim: usize,
    pub data: Option<Dataset>,
}

/// Reads a CSV with header `x1,...,xp,y`. Errors name the offending line.
pub fn read_csv(path: &Path) -> std::result::Result<CsvSample, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let header = reader.headers().map_err(|e| format!("{}: {e}", path.display()))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(format!("{}: no data rows", path.display()));
    }
    let dim = header.len() - 1;
    let expected: Vec<String> = (1..=dim).map(|i| format!("x{i}")).chain(["y".to_string()]).collect();
    if dim == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(format!(
            "{}: line 1: header must be {}, found {}",
            path.display(),
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            format!("{}: line {line}: {e}", path.display())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| format!("{}: line {line}: '{field}' is not a number", path.display()))?;
            if !v.is_finite() {
                return Err(format!("{}: line {line}: value {field} is not finite", path.display()));
            }
            if j < dim {
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!(
                        "{}: line {line}: x{} = {v} outside [0,1]",
                        path.display(),
                        j + 1
                    ));
                }
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    let data = if ys.is_empty() {
        None
    } else {
        Some(Dataset::new(dim, xs, ys).map_err(|e| e.to_string())?)
    };
    Ok(CsvSample { dim, data })
}

fn write_output(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| input(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes")
}

#[derive(Serialize)]
struct FitCell {
    cell: usize,
    count: u64,
    m_hat: Option<f64>,
    p_hat: Option<f64>,
    sigma2_local: Option<f64>,
}

#[derive(Serialize)]
struct FitOutput {
    schema: u64,
    dim: usize,
    inv_mesh: u64,
    n: usize,
    cells: Vec<FitCell>,
}

fn cmd_fit(args: &FitArgs) -> Outcome {
    let sample = read_csv(&args.csv).map_err(Failure::Input)?;
    let grid = Grid::new(sample.dim, args.inv_mesh).map_err(input)?;
    let cells = match &sample.data {
        None => (0..grid.cell_count())
            .map(|cell| FitCell {
                cell,
                count: 0,
                m_hat: None,
                p_hat: None,
                sigma2_local: None,
            })
            .collect(),
        Some(data) => {
            let hist = fit(&grid, data).map_err(input)?;
            let local = sigma2_local(&hist, DEFAULT_VARIANCE_FLOOR);
            let p_hat = hist.p_hat();
            (0..grid.cell_count())
                .map(|c| FitCell {
                    cell: c,
                    count: hist.count[c],
                    m_hat: (!hist.empty[c]).then_some(hist.mean_y[c]),
                    p_hat: Some(p_hat[c]),
                    sigma2_local: local.sigma2[c],
                })
                .collect()
        }
    };
    let out = FitOutput {
        schema: SCHEMA_VERSION,
        dim: sample.dim,
        inv_mesh: args.inv_mesh,
        n: sample.data.as_ref().map_or(0, Dataset::len),
        cells,
    };
    write_output(args.out.as_deref(), &to_json(&out))
}

#[derive(Serialize)]
struct CellBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize)]
struct BandCell {
    cell: usize,
    cell_box: CellBox,
    count: u64,
    center: Option<f64>,
    /// Infinite bounds serialize as `null`.
    lower: f64,
    upper: f64,
    radius: f64,
    degenerate: bool,
}

#[derive(Serialize)]
struct BandOutput {
    schema: u64,
    dim: usize,
    inv_mesh: u64,
    n: usize,
    beta: f64,
    variance: &'static str,
    cells_total: usize,
    quantile: f64,
    cells: Vec<BandCell>,
}

fn read_json_with_schema<T: serde::de::DeserializeOwned>(path: &Path) -> std::result::Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))?;
    match value.get("schema").and_then(serde_json::Value::as_u64) {
        Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(input(format!(
                "{}: unsupported schema {v}, expected {SCHEMA_VERSION}",
                path.display()
            )))
        }
        None => return Err(input(format!("{}: missing \"schema\": {SCHEMA_VERSION}", path.display()))),
    }
    serde_json::from_value(value).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn cmd_band(args: &BandArgs) -> Outcome {
    if !(args.beta > 0.0 && args.beta < 1.0) {
        return Err(input(format!("beta {} not in (0,1)", args.beta)));
    }
    let oracle = match (args.variance, &args.oracle_spec) {
        (VarianceArg::Oracle, None) => return Err(input("--variance oracle requires --oracle-spec")),
        (VarianceArg::Oracle, Some(p)) => Some(read_json_with_schema::<OracleSpecFile>(p)?),
        _ => None,
    };
    let sample = read_csv(&args.csv).map_err(Failure::Input)?;
    let Some(data) = sample.data else {
        return Err(input(format!("{}: no data rows", args.csv.display())));
    };
    let grid = Grid::new(sample.dim, args.inv_mesh).map_err(input)?;
    let hist = fit(&grid, &data).map_err(input)?;
    let (tau, mode) = match args.variance {
        VarianceArg::Global => {
            let g = sigma2_global(&hist, &data, args.variance_floor).map_err(input)?;
            (tau_plugin(&hist, &VarianceModel::Homoscedastic(g.sigma2)), VarianceMode::Global)
        }
        VarianceArg::Local => (
            tau_plugin(&hist, &VarianceModel::Local(sigma2_local(&hist, args.variance_floor))),
            VarianceMode::Local,
        ),
        VarianceArg::Oracle => {
            let spec = oracle.expect("read above");
            let cov = Covariates::new(&spec.covariates).map_err(input)?;
            (
                tau_oracle(&grid, |x| cov.density(x), |x| spec.noise.variance(x)),
                VarianceMode::Oracle,
            )
        }
    };
    let tau = tau.map_err(input)?;
    let band = build_band(&hist, &tau, args.beta).map_err(input)?;
    eprintln!("c(beta) = {:.6}, J = {}", band.quantile, grid.cell_count());

    let cells: Vec<BandCell> = grid
        .cells()
        .map(|cell| {
            let c = cell.linear;
            let (lower, upper) = grid.cell_box(&cell).expect("cell of this grid");
            BandCell {
                cell: c,
                cell_box: CellBox { lower, upper },
                count: hist.count[c],
                center: (!hist.empty[c]).then_some(band.center[c]),
                lower: band.lower(c),
                upper: band.upper(c),
                radius: band.radius[c],
                degenerate: band.degenerate[c],
            }
        })
        .collect();

    if let Some(path) = &args.csv_out {
        let mut text = String::new();
        let axes = |prefix: &str| (1..=grid.dim()).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",");
        writeln!(text, "cell,{},{},center,lower,upper,degenerate", axes("box_lower_"), axes("box_upper_")).unwrap();
        let fmt = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
        for c in &cells {
            let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            writeln!(
                text,
                "{},{},{},{},{},{},{}",
                c.cell,
                join(&c.cell_box.lower),
                join(&c.cell_box.upper),
                c.center.map_or(String::new(), fmt),
                fmt(c.lower),
                fmt(c.upper),
                c.degenerate
            )
            .unwrap();
        }
        std::fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display())))?;
    }

    let out = BandOutput {
        schema: SCHEMA_VERSION,
        dim: grid.dim(),
        inv_mesh: grid.inv_mesh(),
        n: data.len(),
        beta: args.beta,
        variance: match mode {
            VarianceMode::Global => "global",
            VarianceMode::Local => "local",
            VarianceMode::Oracle => "oracle",
        },
        cells_total: grid.cell_count(),
        quantile: band.quantile,
        cells,
    };
    write_output(args.out.as_deref(), &to_json(&out))
}

fn cmd_quantile(args: &QuantileArgs) -> Outcome {
    let spec = QuantileSpec::new(args.cells, args.beta).map_err(input)?;
    println!("{:.6}", gaussian_max_quantile(spec));
    Ok(())
}

fn workers(requested: Option<usize>) -> std::result::Result<usize, Failure> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(input(format!("{THREADS_ENV}={v} is not a positive integer"))),
        };
    }
    Ok(requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1))
}

/// Checks the configured thresholds against a report; returns the failures.
pub fn check_thresholds(report: &ExperimentReport, t: &Thresholds) -> Vec<String> {
    let mut failures = Vec::new();
    match &report.summary {
        Summary::Coverage(s) => {
            if let Some(min) = t.min_coverage {
                if s.coverage < min {
                    failures.push(format!("coverage {:.4} < {min}", s.coverage));
                }
            }
        }
        Summary::Rate(s) => {
            if let Some(st) = t.slope {
                match &s.fit {
                    Some(f) if (f.slope - st.target).abs() <= st.tolerance => {}
                    Some(f) => failures.push(format!(
                        "slope {:.4} outside {} ± {}",
                        f.slope, st.target, st.tolerance
                    )),
                    None => failures.push("slope could not be fitted".to_string()),
                }
            }
        }
        Summary::GaussApprox(s) => {
            if let Some(max) = t.max_ks_distance {
                if s.out_of_regime {
                    eprintln!("note: sample size out of regime, KS distance not asserted");
                } else if s.ks_distance > max {
                    failures.push(format!("KS distance {:.4} > {max}", s.ks_distance));
                }
            }
        }
        Summary::Phat(s) => {
            if t.phat_decreasing == Some(true) && !s.decreasing {
                failures.push("scaled p-hat statistic is not decreasing".to_string());
            }
        }
        Summary::ApproxError(s) => {
            if t.within_bound == Some(true) && !s.within_bound {
                failures.push(format!("approximation error {:.3e} exceeds {:.3e}", s.max_error, s.bound));
            }
        }
        Summary::VerifyBinomial(s) => {
            if !s.bounded() {
                failures.push(format!("binomial ratios show an upward trend (verdict {})", s.verdict));
            }
            if !s.identity_holds {
                failures.push(format!(
                    "decomposition identity residual {:.3e} too large",
                    s.max_identity_residual
                ));
            }
        }
    }
    failures
}

fn cmd_simulate(args: &SimulateArgs) -> Outcome {
    let file = match &args.config {
        Some(p) => Some(read_json_with_schema::<RunConfigFile>(p)?),
        None if args.experiment == Experiment::VerifyBinomial => None,
        None => return Err(input("--config is required")),
    };
    let runner = Runner::new(workers(args.workers)?).map_err(input)?;
    let thresholds = file.as_ref().map(|f| f.thresholds.clone()).unwrap_or_default();

    let report = if args.experiment == Experiment::VerifyBinomial {
        match file.as_ref().and_then(|f| f.binomial.clone()) {
            Some(b) => runner.verify_binomial(move || binomial_ratio_sweep(&b.n_values, &b.p_values, &b.q_values)),
            None => runner.verify_binomial(default_sweep),
        }
    } else {
        let file = file.expect("config present");
        let Some(mut scenario) = file.scenario else {
            return Err(input("config has no \"scenario\""));
        };
        if let Some(seed) = args.seed {
            scenario.seed = seed;
        }
        match args.experiment {
            Experiment::Coverage => runner.coverage(&scenario),
            Experiment::Rate => runner.rate(&scenario, &file.sample_sizes),
            Experiment::GaussApprox => runner.gauss_approx(&scenario),
            Experiment::Phat => runner.phat(&scenario, &file.sample_sizes),
            Experiment::ApproxError => runner.approx_error(&scenario),
            Experiment::VerifyBinomial => unreachable!(),
        }
    }
    .map_err(input)?;

    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    write_output(args.out.as_deref(), &report.to_json())?;
    if let Some(path) = &args.records_csv {
        let csv = report.records_csv().map_err(input)?;
        std::fs::write(path, csv).map_err(|e| input(format!("{}: {e}", path.display())))?;
    }
    let failures = check_thresholds(&report, &thresholds);
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Threshold(failures.join("; ")))
    }
}
