//! Monte Carlo experiments.
//!
//! Replications run on a dedicated rayon pool. Results are collected in
//! replication order and summarised sequentially, so a report depends only
//! on its configuration and seed.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bands::{build_band_with_quantile, covers, gaussian_max_cdf, gaussian_max_quantile, probe_sup_error, DegeneratePolicy, QuantileSpec};
use crate::binomial::SweepReport;
use crate::error::{Error, Result};
use crate::estimators::{
    decompose, fit, sigma2_global, sigma2_local, tau_plugin, HistogramFit, TauModel, VarianceMode, VarianceModel,
};
use crate::grid::Grid;

use super::scenario::{MeshRule, Scenario, ScenarioAudit, ScenarioConfig};
use super::stats::{fit_slope, ks_distance, median, wilson_interval, Interval, SlopeFit};

/// Standard normal 97.5% quantile.
const Z_95: f64 = 1.959_963_984_540_054;

/// Below this expected count per cell a sample size is out of regime.
pub const MIN_EXPECTED_CELL_COUNT: f64 = 10.0;

/// Additive slack on the approximation-error bound.
pub const APPROX_SLACK: f64 = 1e-10;

/// Probes per axis and cell for the approximation-error experiment.
pub const APPROX_PROBES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Coverage,
    Rate,
    GaussApprox,
    Phat,
    ApproxError,
    VerifyBinomial,
}

/// One replication at one sample size.
///
/// `statistic` depends on the experiment: the largest `|m − center| / radius`
/// over probes of nondegenerate cells (coverage), the probe sup error of
/// `m̂` (rate), `T_r` (gauss-approx), `max |p̂/p_δ − 1|` (phat) and the probe
/// sup error of the regression part `m̂^(m)` (approx-error).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub point: usize,
    pub n: usize,
    pub replication: u64,
    pub empty_cells: usize,
    pub statistic: f64,
    pub covered: Option<bool>,
    pub degenerate: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub replications: usize,
    pub covered: usize,
    pub coverage: f64,
    /// 95% Wilson interval.
    pub ci: Interval,
    pub degenerate_replications: usize,
    pub covered_nondegenerate: usize,
    pub quantile: f64,
    pub cells: usize,
    pub note: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub inv_mesh: u64,
    pub median_sup_error: f64,
    pub replications_with_empty_cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateSummary {
    pub points: Vec<RatePoint>,
    /// Slope of `ln(median sup error)` on `ln(n / ln n)`; absent when some
    /// median is zero.
    pub fit: Option<SlopeFit>,
    /// `−α / (2α + p)` for the rate mesh rule.
    pub theoretical_slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussApproxSummary {
    pub replications: usize,
    pub cells: usize,
    pub ks_distance: f64,
    /// Fewer than ten expected observations per cell: diagnostic only.
    pub out_of_regime: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhatPoint {
    pub n: usize,
    pub median_max_relative_error: f64,
    /// `(ln n)^{3/2} × median`.
    pub scaled: f64,
    pub out_of_regime: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhatSummary {
    pub points: Vec<PhatPoint>,
    /// Scaled statistic strictly decreasing over the three largest `n`.
    pub decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproxErrorSummary {
    pub replications: usize,
    pub evaluated: usize,
    pub max_error: f64,
    /// `C_H (√p δ)^α + slack`.
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Summary {
    Coverage(CoverageSummary),
    Rate(RateSummary),
    GaussApprox(GaussApproxSummary),
    Phat(PhatSummary),
    ApproxError(ApproxErrorSummary),
    VerifyBinomial(SweepReport),
}

/// Run metadata; excluded from reproducibility comparisons.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Meta {
    pub workers: usize,
    pub elapsed_ms: u128,
    pub version: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub config: Option<ScenarioConfig>,
    pub sample_sizes: Vec<usize>,
    pub seed: u64,
    pub audit: Vec<ScenarioAudit>,
    pub warnings: Vec<String>,
    pub summary: Summary,
    pub records: Vec<ReplicationRecord>,
    pub meta: Meta,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with the `meta` object removed.
    pub fn to_json_without_meta(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("report is an object").remove("meta");
        serde_json::to_string_pretty(&v).expect("report serializes")
    }

    /// Per-replication records as CSV.
    pub fn records_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r).map_err(|e| Error::Numeric(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Executes experiments on a fixed number of worker threads.
pub struct Runner {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl Runner {
    pub fn new(workers: usize) -> Result<Self> {
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
        Ok(Self { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `task` for every `(point, replication)` pair and returns results
    /// in that order.
    fn replicate<T: Send>(
        &self,
        scenarios: &[Scenario],
        replications: usize,
        task: impl Fn(&Scenario, u64) -> Result<T> + Sync,
    ) -> Result<Vec<T>> {
        let jobs: Vec<(usize, u64)> = (0..scenarios.len())
            .flat_map(|k| (0..replications as u64).map(move |r| (k, r)))
            .collect();
        self.pool
            .install(|| jobs.par_iter().map(|&(k, r)| task(&scenarios[k], r)).collect())
    }

    fn report(
        &self,
        started: Instant,
        kind: ExperimentKind,
        config: &ScenarioConfig,
        scenarios: &[Scenario],
        summary: Summary,
        records: Vec<ReplicationRecord>,
    ) -> ExperimentReport {
        let audit: Vec<ScenarioAudit> = scenarios.iter().map(Scenario::audit).collect();
        let mut warnings = Vec::new();
        for a in &audit {
            let extra = if kind == ExperimentKind::Coverage {
                a.undersmoothing_warnings()
            } else {
                Vec::new()
            };
            for w in a.warnings.iter().chain(&extra) {
                let w = format!("n={}: {w}", a.n);
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
        }
        ExperimentReport {
            kind,
            config: Some(config.clone()),
            sample_sizes: scenarios.iter().map(|s| s.n).collect(),
            seed: config.seed,
            audit,
            warnings,
            summary,
            records,
            meta: self.meta(started),
        }
    }

    fn meta(&self, started: Instant) -> Meta {
        Meta {
            workers: self.workers,
            elapsed_ms: started.elapsed().as_millis(),
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    /// Replicates generate → fit → τ → band → covers at `config.n`.
    pub fn coverage(&self, config: &ScenarioConfig) -> Result<ExperimentReport> {
        let started = Instant::now();
        let scenario = Scenario::new(config, config.n, 0)?;
        if config.variance == VarianceMode::Oracle && scenario.oracle_tau.is_none() {
            return Err(Error::Config(
                "oracle variance mode needs noise variance bounded away from zero".into(),
            ));
        }
        let cells = scenario.grid.cell_count();
        let quantile = gaussian_max_quantile(QuantileSpec::new(cells, config.beta)?);
        let probes = config.probe_points();
        let scenarios = [scenario];
        let records = self.replicate(&scenarios, config.replications, |s, r| {
            let sample = s.generate(r)?;
            let hist = fit(&s.grid, &sample.data)?;
            let tau = tau_for(s, &hist, &sample.data)?;
            let band = build_band_with_quantile(&hist, &tau, config.beta, quantile)?;
            let covered = covers(&band, |x| s.m(x), probes, DegeneratePolicy::Cover);
            let statistic = s
                .grid
                .cells()
                .filter(|c| !band.degenerate[c.linear])
                .flat_map(|c| {
                    let (center, radius) = (band.center[c.linear], band.radius[c.linear]);
                    s.grid
                        .probe_points(&c.multi, probes)
                        .into_iter()
                        .map(move |x| (s.m(&x) - center).abs() / radius)
                        .collect::<Vec<_>>()
                })
                .fold(0.0, f64::max);
            Ok(ReplicationRecord {
                point: 0,
                n: s.n,
                replication: r,
                empty_cells: hist.empty.iter().filter(|&&e| e).count(),
                statistic,
                covered: Some(covered),
                degenerate: Some(band.any_degenerate()),
            })
        })?;
        let covered = records.iter().filter(|r| r.covered == Some(true)).count();
        let degenerate = records.iter().filter(|r| r.degenerate == Some(true)).count();
        let covered_nondegenerate = records
            .iter()
            .filter(|r| r.covered == Some(true) && r.degenerate == Some(false))
            .count();
        let total = records.len();
        let summary = Summary::Coverage(CoverageSummary {
            replications: total,
            covered,
            coverage: covered as f64 / total as f64,
            ci: wilson_interval(covered, total, Z_95),
            degenerate_replications: degenerate,
            covered_nondegenerate,
            quantile,
            cells,
            note: "finite-sample coverage for this regression function and sample size only; \
                   the uniform guarantee is asymptotic",
        });
        Ok(self.report(started, ExperimentKind::Coverage, config, &scenarios, summary, records))
    }

    /// Median probe sup error of `m̂` at each sample size and its log-log
    /// slope against `n / ln n`.
    pub fn rate(&self, config: &ScenarioConfig, sample_sizes: &[usize]) -> Result<ExperimentReport> {
        let started = Instant::now();
        check_sweep(sample_sizes, 4, 100.0)?;
        let scenarios = scenarios_for(config, sample_sizes)?;
        let probes = config.probe_points();
        let records = self.replicate(&scenarios, config.replications, |s, r| {
            let sample = s.generate(r)?;
            let hist = fit(&s.grid, &sample.data)?;
            let statistic = probe_sup_error(&s.grid, &hist.mean_y, &hist.empty, |x| s.m(x), probes);
            Ok(record(s, r, &hist, statistic))
        })?;
        let points: Vec<RatePoint> = scenarios
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let at: Vec<&ReplicationRecord> = records.iter().filter(|r| r.point == k).collect();
                RatePoint {
                    n: s.n,
                    inv_mesh: s.grid.inv_mesh(),
                    median_sup_error: median(&at.iter().map(|r| r.statistic).collect::<Vec<_>>()),
                    replications_with_empty_cells: at.iter().filter(|r| r.empty_cells > 0).count(),
                }
            })
            .collect();
        let fit = points.iter().all(|p| p.median_sup_error > 0.0).then(|| {
            let x: Vec<f64> = points.iter().map(|p| (p.n as f64 / (p.n as f64).ln()).ln()).collect();
            let y: Vec<f64> = points.iter().map(|p| p.median_sup_error.ln()).collect();
            fit_slope(&x, &y, 0.95)
        });
        let theoretical_slope = match config.mesh {
            MeshRule::Rate { alpha } => Some(-alpha / (2.0 * alpha + config.dim as f64)),
            MeshRule::Fixed(_) => None,
        };
        let summary = Summary::Rate(RateSummary {
            points,
            fit,
            theoretical_slope,
        });
        Ok(self.report(started, ExperimentKind::Rate, config, &scenarios, summary, records))
    }

    /// Distribution of `T_r = √n max_c √τ_c |m̃^(ε)_c|` against the law of the
    /// maximum of `J` independent `|N(0,1)|`.
    pub fn gauss_approx(&self, config: &ScenarioConfig) -> Result<ExperimentReport> {
        let started = Instant::now();
        let scenario = Scenario::new(config, config.n, 0)?;
        let Some(tau) = scenario.oracle_tau.clone() else {
            return Err(Error::Config(
                "gauss-approx needs noise variance bounded away from zero".into(),
            ));
        };
        let root_tau: Vec<f64> = tau.tau.iter().map(|t| t.expect("oracle tau is defined").sqrt()).collect();
        let cells = scenario.grid.cell_count();
        let out_of_regime = out_of_regime(&scenario.grid, config.n);
        let scenarios = [scenario];
        let records = self.replicate(&scenarios, config.replications, |s, r| {
            let sample = s.generate(r)?;
            let d = decompose(&s.grid, &sample.data, |x| s.m(x), &sample.eps, &s.p_delta)?;
            let root_n = (s.n as f64).sqrt();
            let statistic = d
                .m_tilde_eps
                .iter()
                .zip(&root_tau)
                .map(|(m, t)| root_n * t * m.abs())
                .fold(0.0, f64::max);
            Ok(ReplicationRecord {
                point: 0,
                n: s.n,
                replication: r,
                empty_cells: d.count.iter().filter(|&&k| k == 0).count(),
                statistic,
                covered: None,
                degenerate: None,
            })
        })?;
        let t: Vec<f64> = records.iter().map(|r| r.statistic).collect();
        let summary = Summary::GaussApprox(GaussApproxSummary {
            replications: t.len(),
            cells,
            ks_distance: ks_distance(&t, |v| gaussian_max_cdf(v, cells)),
            out_of_regime,
        });
        Ok(self.report(started, ExperimentKind::GaussApprox, config, &scenarios, summary, records))
    }

    /// `max_c |p̂/p_δ − 1|` across sample sizes, scaled by `(ln n)^{3/2}`.
    pub fn phat(&self, config: &ScenarioConfig, sample_sizes: &[usize]) -> Result<ExperimentReport> {
        let started = Instant::now();
        check_sweep(sample_sizes, 1, 1.0)?;
        let scenarios = scenarios_for(config, sample_sizes)?;
        let records = self.replicate(&scenarios, config.replications, |s, r| {
            let xs = s.generate_covariates(r);
            let mut count = vec![0u64; s.grid.cell_count()];
            for x in xs.chunks_exact(s.grid.dim()) {
                count[s.grid.locate(x)?] += 1;
            }
            Ok(ReplicationRecord {
                point: s.point as usize,
                n: s.n,
                replication: r,
                empty_cells: count.iter().filter(|&&k| k == 0).count(),
                statistic: max_relative_error(&count, &s.p_delta),
                covered: None,
                degenerate: None,
            })
        })?;
        let points: Vec<PhatPoint> = scenarios
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let stats: Vec<f64> = records.iter().filter(|r| r.point == k).map(|r| r.statistic).collect();
                let med = median(&stats);
                PhatPoint {
                    n: s.n,
                    median_max_relative_error: med,
                    scaled: (s.n as f64).ln().powf(1.5) * med,
                    out_of_regime: out_of_regime(&s.grid, s.n),
                }
            })
            .collect();
        let tail = &points[points.len().saturating_sub(3)..];
        let decreasing = tail.len() >= 2 && tail.windows(2).all(|w| w[1].scaled < w[0].scaled);
        let summary = Summary::Phat(PhatSummary { points, decreasing });
        Ok(self.report(started, ExperimentKind::Phat, config, &scenarios, summary, records))
    }

    /// Probe sup of `|m̂^(m) − m|` on replications without empty cells,
    /// against the bound `C_H (√p δ)^α`.
    pub fn approx_error(&self, config: &ScenarioConfig) -> Result<ExperimentReport> {
        let started = Instant::now();
        let scenario = Scenario::new(config, config.n, 0)?;
        let Some((alpha, c_h)) = scenario.regression.holder() else {
            return Err(Error::Config("approx-error needs a Hölder regression function".into()));
        };
        let bound = c_h * scenario.grid.cell_diameter().powf(alpha) + APPROX_SLACK;
        let scenarios = [scenario];
        let records = self.replicate(&scenarios, config.replications, |s, r| {
            let sample = s.generate(r)?;
            let d = decompose(&s.grid, &sample.data, |x| s.m(x), &sample.eps, &s.p_delta)?;
            let empty: Vec<bool> = d.count.iter().map(|&k| k == 0).collect();
            let empty_cells = empty.iter().filter(|&&e| e).count();
            let statistic = if empty_cells == 0 {
                probe_sup_error(&s.grid, &d.m_hat_m, &empty, |x| s.m(x), APPROX_PROBES)
            } else {
                f64::NAN
            };
            Ok(ReplicationRecord {
                point: 0,
                n: s.n,
                replication: r,
                empty_cells,
                statistic,
                covered: None,
                degenerate: None,
            })
        })?;
        let evaluated: Vec<f64> = records.iter().filter(|r| r.empty_cells == 0).map(|r| r.statistic).collect();
        let max_error = evaluated.iter().copied().fold(0.0, f64::max);
        let summary = Summary::ApproxError(ApproxErrorSummary {
            replications: records.len(),
            evaluated: evaluated.len(),
            max_error,
            bound,
            within_bound: evaluated.iter().all(|&e| e <= bound),
        });
        Ok(self.report(started, ExperimentKind::ApproxError, config, &scenarios, summary, records))
    }

    /// Wraps a binomial sweep in a report.
    pub fn verify_binomial(&self, sweep: impl FnOnce() -> Result<SweepReport> + Send) -> Result<ExperimentReport> {
        let started = Instant::now();
        let report = self.pool.install(sweep)?;
        Ok(ExperimentReport {
            kind: ExperimentKind::VerifyBinomial,
            config: None,
            sample_sizes: Vec::new(),
            seed: 0,
            audit: Vec::new(),
            warnings: Vec::new(),
            summary: Summary::VerifyBinomial(report),
            records: Vec::new(),
            meta: self.meta(started),
        })
    }
}

/// [`Runner::coverage`] on `workers` threads.
pub fn coverage_experiment(config: &ScenarioConfig, workers: usize) -> Result<ExperimentReport> {
    Runner::new(workers)?.coverage(config)
}

/// [`Runner::rate`] on `workers` threads.
pub fn rate_experiment(config: &ScenarioConfig, sample_sizes: &[usize], workers: usize) -> Result<ExperimentReport> {
    Runner::new(workers)?.rate(config, sample_sizes)
}

/// [`Runner::gauss_approx`] on `workers` threads.
pub fn gauss_approx_experiment(config: &ScenarioConfig, workers: usize) -> Result<ExperimentReport> {
    Runner::new(workers)?.gauss_approx(config)
}

/// [`Runner::phat`] on `workers` threads.
pub fn phat_experiment(config: &ScenarioConfig, sample_sizes: &[usize], workers: usize) -> Result<ExperimentReport> {
    Runner::new(workers)?.phat(config, sample_sizes)
}

/// [`Runner::approx_error`] on `workers` threads.
pub fn approx_error_experiment(config: &ScenarioConfig, workers: usize) -> Result<ExperimentReport> {
    Runner::new(workers)?.approx_error(config)
}

/// `max_c |count_c / (n p_c) − 1|`.
pub fn max_relative_error(count: &[u64], p_delta: &[f64]) -> f64 {
    let n: u64 = count.iter().sum();
    count
        .iter()
        .zip(p_delta)
        .map(|(&k, &p)| (k as f64 / (n as f64 * p) - 1.0).abs())
        .fold(0.0, f64::max)
}

fn out_of_regime(grid: &Grid, n: usize) -> bool {
    n as f64 * grid.cell_volume() < MIN_EXPECTED_CELL_COUNT
}

fn tau_for(s: &Scenario, hist: &HistogramFit, data: &crate::estimators::Dataset) -> Result<TauModel> {
    let floor = s.config.variance_floor;
    match s.config.variance {
        VarianceMode::Oracle => Ok(s.oracle_tau.clone().expect("checked before replication")),
        VarianceMode::Global => {
            let g = sigma2_global(hist, data, floor)?;
            tau_plugin(hist, &VarianceModel::Homoscedastic(g.sigma2))
        }
        VarianceMode::Local => tau_plugin(hist, &VarianceModel::Local(sigma2_local(hist, floor))),
    }
}

fn record(s: &Scenario, r: u64, hist: &HistogramFit, statistic: f64) -> ReplicationRecord {
    ReplicationRecord {
        point: s.point as usize,
        n: s.n,
        replication: r,
        empty_cells: hist.empty.iter().filter(|&&e| e).count(),
        statistic,
        covered: None,
        degenerate: None,
    }
}

fn check_sweep(sample_sizes: &[usize], min_points: usize, min_span: f64) -> Result<()> {
    if sample_sizes.len() < min_points {
        return Err(Error::Config(format!("need at least {min_points} sample sizes")));
    }
    if sample_sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("sample sizes must be strictly increasing".into()));
    }
    let span = *sample_sizes.last().unwrap() as f64 / sample_sizes[0] as f64;
    if span < min_span {
        return Err(Error::Config(format!(
            "sample sizes span a factor {span:.1}, need at least {min_span}"
        )));
    }
    Ok(())
}

fn scenarios_for(config: &ScenarioConfig, sample_sizes: &[usize]) -> Result<Vec<Scenario>> {
    sample_sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| Scenario::new(config, n, k as u64))
        .collect()
}
