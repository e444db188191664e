//! Uniform confidence bands around the histogram estimate.
//!
//! The band radius on a cell is `c · (τ n)^{-1/2}` where `c` is the
//! `(1 − β)`-quantile of the maximum of `J` independent `|N(0,1)|` variables
//! and `J` is the number of cells. Independence makes the distribution of the
//! maximum factor as `(2Φ(c) − 1)^J`, so the quantile has a closed form.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::estimators::{HistogramFit, TauModel};
use crate::grid::Grid;
use crate::normal;

/// Number of independent normals and the miscoverage level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuantileSpec {
    pub cells: usize,
    pub beta: f64,
}

impl QuantileSpec {
    pub fn new(cells: usize, beta: f64) -> Result<Self> {
        if cells == 0 {
            return Err(domain("quantile needs at least one cell"));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(domain(format!("beta = {beta} is not in (0,1)")));
        }
        Ok(Self { cells, beta })
    }
}

/// The `c` with `P(max_{j ≤ J} |Z_j| ≤ c) = 1 − β`.
///
/// Solves `(2Φ(c) − 1)^J = 1 − β` through the upper tail
/// `1 − Φ(c) = (1 − (1 − β)^{1/J}) / 2`, evaluated with `expm1`/`ln_1p` so
/// large `J` loses no precision.
pub fn gaussian_max_quantile(spec: QuantileSpec) -> f64 {
    let log_keep = (-spec.beta).ln_1p();
    let per_cell_miss = -(log_keep / spec.cells as f64).exp_m1();
    normal::isf(0.5 * per_cell_miss)
}

/// `P(max_{j ≤ J} |Z_j| ≤ c) = (2Φ(c) − 1)^J`.
pub fn gaussian_max_cdf(c: f64, cells: usize) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    // ln(2Φ(c) − 1) = ln(1 − 2(1 − Φ(c)))
    (cells as f64 * (-2.0 * normal::sf(c)).ln_1p()).exp()
}

/// Piecewise-constant band `[center − radius, center + radius]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfidenceBand {
    pub grid: Grid,
    pub n: usize,
    pub center: Vec<f64>,
    /// `+∞` on degenerate cells.
    pub radius: Vec<f64>,
    /// Empty cell or undefined τ.
    pub degenerate: Vec<bool>,
    pub beta: f64,
    pub quantile: f64,
}

impl ConfidenceBand {
    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }

    pub fn lower(&self, cell: usize) -> f64 {
        self.center[cell] - self.radius[cell]
    }

    pub fn upper(&self, cell: usize) -> f64 {
        self.center[cell] + self.radius[cell]
    }
}

/// Band with quantile `c_δ(β)` for `J = grid.cell_count()`.
pub fn build_band(fit: &HistogramFit, tau: &TauModel, beta: f64) -> Result<ConfidenceBand> {
    let spec = QuantileSpec::new(fit.grid.cell_count(), beta)?;
    build_band_with_quantile(fit, tau, beta, gaussian_max_quantile(spec))
}

/// Band with a caller-supplied quantile in place of `c_δ(β)`.
pub fn build_band_with_quantile(
    fit: &HistogramFit,
    tau: &TauModel,
    beta: f64,
    quantile: f64,
) -> Result<ConfidenceBand> {
    if fit.grid != tau.grid {
        return Err(domain("fit and tau are defined on different grids"));
    }
    let n = fit.n as f64;
    let cells = fit.grid.cell_count();
    let mut radius = Vec::with_capacity(cells);
    let mut degenerate = Vec::with_capacity(cells);
    for c in 0..cells {
        match tau.tau[c] {
            Some(t) if !fit.empty[c] && t > 0.0 => {
                radius.push(quantile / (t * n).sqrt());
                degenerate.push(false);
            }
            _ => {
                radius.push(f64::INFINITY);
                degenerate.push(true);
            }
        }
    }
    Ok(ConfidenceBand {
        grid: fit.grid,
        n: fit.n,
        center: fit.mean_y.clone(),
        radius,
        degenerate,
        beta,
        quantile,
    })
}

/// How [`covers`] treats degenerate cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DegeneratePolicy {
    /// Infinite radius: the cell always covers.
    #[default]
    Cover,
    /// A degenerate cell counts as a miss.
    Fail,
}

/// Whether `m` lies inside the band at every probe point.
///
/// Probes form a `probe_points_per_axis^p` tensor grid inside each cell (see
/// [`Grid::probe_points`]). For `m` constant on cells one probe is exact.
pub fn covers(
    band: &ConfidenceBand,
    m: impl Fn(&[f64]) -> f64,
    probe_points_per_axis: usize,
    policy: DegeneratePolicy,
) -> bool {
    band.grid.cells().all(|cell| {
        let c = cell.linear;
        if band.degenerate[c] {
            return policy == DegeneratePolicy::Cover;
        }
        band.grid
            .probe_points(&cell.multi, probe_points_per_axis)
            .iter()
            .all(|x| (m(x) - band.center[c]).abs() <= band.radius[c])
    })
}

/// Largest `|m(x) − center|` over the probe points of nonempty cells.
pub fn probe_sup_error(
    grid: &Grid,
    center: &[f64],
    skip: &[bool],
    m: impl Fn(&[f64]) -> f64,
    probe_points_per_axis: usize,
) -> f64 {
    grid.cells()
        .filter(|cell| !skip[cell.linear])
        .flat_map(|cell| {
            let c = center[cell.linear];
            grid.probe_points(&cell.multi, probe_points_per_axis)
                .into_iter()
                .map(|x| (m(&x) - c).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}
