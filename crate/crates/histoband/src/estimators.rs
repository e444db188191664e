//! Histogram regression fit and the plug-in quantities built from it.
//!
//! A [`HistogramFit`] holds per-cell counts together with the cell averages
//! of `Y` and `Y²`. Everything else (the regression estimate, the empirical
//! cell probabilities, both variance estimators and the plug-in precision
//! `τ̂ = p̂ / σ̂²`) is read off those three arrays.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::Grid;
use crate::quadrature;

/// Lower clamp applied to every variance estimate.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-8;

/// Regression sample `(X_i, Y_i)` with covariates in `[0,1]^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Dataset {
    /// `xs` is row-major with `dim` coordinates per observation.
    pub fn new(dim: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(domain("dataset dimension must be positive"));
        }
        if ys.is_empty() {
            return Err(domain("dataset needs at least one observation"));
        }
        if xs.len() != dim * ys.len() {
            return Err(domain(format!(
                "{} covariate values for {} observations of dimension {dim}",
                xs.len(),
                ys.len()
            )));
        }
        if let Some(pos) = xs.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(domain(format!(
                "observation {} has coordinate {} outside [0,1]",
                pos / dim,
                xs[pos]
            )));
        }
        if let Some(pos) = ys.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("response {pos} is not finite")));
        }
        Ok(Self { dim, xs, ys })
    }

    pub fn from_rows(rows: &[Vec<f64>], ys: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(domain("rows have differing dimensions"));
        }
        Self::new(dim, rows.concat(), ys)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn xs(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.xs.chunks_exact(self.dim)
    }
}

/// Per-cell sufficient statistics of the histogram regression estimator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramFit {
    pub grid: Grid,
    pub n: usize,
    pub count: Vec<u64>,
    /// Cell average of `Y`; exactly 0 on empty cells.
    pub mean_y: Vec<f64>,
    /// Cell average of `Y²`; exactly 0 on empty cells.
    pub mean_y2: Vec<f64>,
    pub empty: Vec<bool>,
}

/// Single-pass histogram fit.
pub fn fit(grid: &Grid, data: &Dataset) -> Result<HistogramFit> {
    if data.dim() != grid.dim() {
        return Err(domain(format!(
            "data dimension {} does not match grid dimension {}",
            data.dim(),
            grid.dim()
        )));
    }
    let cells = grid.cell_count();
    let mut count = vec![0u64; cells];
    let mut sum_y = vec![0.0; cells];
    let mut sum_y2 = vec![0.0; cells];
    for (x, &y) in data.xs().zip(data.ys()) {
        let c = grid.locate(x)?;
        count[c] += 1;
        sum_y[c] += y;
        sum_y2[c] += y * y;
    }
    let empty: Vec<bool> = count.iter().map(|&k| k == 0).collect();
    for c in 0..cells {
        if count[c] > 0 {
            let k = count[c] as f64;
            sum_y[c] /= k;
            sum_y2[c] /= k;
        }
    }
    Ok(HistogramFit {
        grid: *grid,
        n: data.len(),
        count,
        mean_y: sum_y,
        mean_y2: sum_y2,
        empty,
    })
}

impl HistogramFit {
    /// m̂(x), 0 on empty cells.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.mean_y[self.grid.locate(x)?])
    }

    pub fn any_empty(&self) -> bool {
        self.empty.iter().any(|&e| e)
    }

    /// Empirical cell probabilities `count / n`.
    pub fn p_hat(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.count.iter().map(|&k| k as f64 / n).collect()
    }
}

/// See [`HistogramFit::p_hat`].
pub fn p_hat(fit: &HistogramFit) -> Vec<f64> {
    fit.p_hat()
}

/// Global residual variance estimate together with a degeneracy flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GlobalVariance {
    pub sigma2: f64,
    /// Some observation was evaluated on an empty cell. Cannot happen when
    /// the fit and the data agree, but is reported rather than assumed.
    pub degenerate: bool,
}

/// Mean squared residual `n^{-1} Σ (Y_i − m̂(X_i))²`, clamped at `floor`.
pub fn sigma2_global(fit: &HistogramFit, data: &Dataset, floor: f64) -> Result<GlobalVariance> {
    if data.dim() != fit.grid.dim() {
        return Err(domain("data dimension does not match the fit"));
    }
    let mut degenerate = false;
    let mut sum = 0.0;
    for (x, &y) in data.xs().zip(data.ys()) {
        let c = fit.grid.locate(x)?;
        degenerate |= fit.empty[c];
        let r = y - fit.mean_y[c];
        sum += r * r;
    }
    Ok(GlobalVariance {
        sigma2: (sum / data.len() as f64).max(floor),
        degenerate,
    })
}

/// Cellwise variance function estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalVariance {
    /// `max(mean_y2 − mean_y², floor)` on nonempty cells, `None` on empty ones.
    pub sigma2: Vec<Option<f64>>,
    /// Cells holding fewer than two observations.
    pub low_count: Vec<bool>,
}

pub fn sigma2_local(fit: &HistogramFit, floor: f64) -> LocalVariance {
    let sigma2 = (0..fit.count.len())
        .map(|c| {
            (!fit.empty[c]).then(|| (fit.mean_y2[c] - fit.mean_y[c] * fit.mean_y[c]).max(floor))
        })
        .collect();
    let low_count = fit.count.iter().map(|&k| k < 2).collect();
    LocalVariance { sigma2, low_count }
}

/// How the noise variance enters the plug-in precision.
#[derive(Clone, Debug, PartialEq)]
pub enum VarianceModel {
    Homoscedastic(f64),
    Local(LocalVariance),
}

/// Selects the source of τ for band construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMode {
    /// Residual variance `σ̂²` shared by all cells.
    Global,
    /// Cellwise `σ̂²(x)`.
    Local,
    /// Known covariate density and variance function.
    Oracle,
}

/// Per-cell precision `τ = p² / s`; `None` where it is undefined.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TauModel {
    pub grid: Grid,
    pub tau: Vec<Option<f64>>,
}

impl TauModel {
    pub fn is_defined(&self, cell: usize) -> bool {
        self.tau[cell].is_some()
    }
}

/// Plug-in precision `τ̂ = p̂ / σ̂²` (or `p̂ / σ̂²(x)`), undefined on empty cells.
pub fn tau_plugin(fit: &HistogramFit, var: &VarianceModel) -> Result<TauModel> {
    let p_hat = fit.p_hat();
    let tau = match var {
        VarianceModel::Homoscedastic(s2) => {
            if !(*s2 > 0.0 && s2.is_finite()) {
                return Err(Error::Numeric(format!("variance {s2} is not positive")));
            }
            p_hat
                .iter()
                .zip(&fit.empty)
                .map(|(&p, &e)| (!e).then(|| p / s2))
                .collect()
        }
        VarianceModel::Local(local) => {
            if local.sigma2.len() != p_hat.len() {
                return Err(domain("local variance does not match the grid"));
            }
            p_hat
                .iter()
                .zip(&fit.empty)
                .zip(&local.sigma2)
                .map(|((&p, &e), s2)| match (e, s2) {
                    (false, Some(s2)) if *s2 > 0.0 => Some(p / s2),
                    _ => None,
                })
                .collect()
        }
    };
    Ok(TauModel { grid: fit.grid, tau })
}

/// Exact cell integrals `p_δ = ∫ f_X` and `s_δ = ∫ σ² f_X`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellIntegrals {
    pub p: Vec<f64>,
    pub s: Vec<f64>,
}

impl CellIntegrals {
    /// Gauss–Legendre (8 nodes per axis) integration over every cell.
    pub fn compute(
        grid: &Grid,
        f_x: impl Fn(&[f64]) -> f64,
        sigma2: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let mut p = Vec::with_capacity(grid.cell_count());
        let mut s = Vec::with_capacity(grid.cell_count());
        for cell in grid.cells() {
            let (lo, hi) = grid.box_of_multi(&cell.multi);
            let [pc, sc] = quadrature::integrate_box(&lo, &hi, |x| {
                let f = f_x(x);
                [f, sigma2(x) * f]
            });
            if !(pc > 0.0 && sc > 0.0 && pc.is_finite() && sc.is_finite()) {
                return Err(Error::Numeric(format!(
                    "cell {} has nonpositive integrals p={pc}, s={sc}",
                    cell.linear
                )));
            }
            p.push(pc);
            s.push(sc);
        }
        Ok(Self { p, s })
    }

    pub fn tau(&self, grid: &Grid) -> TauModel {
        TauModel {
            grid: *grid,
            tau: self.p.iter().zip(&self.s).map(|(p, s)| Some(p * p / s)).collect(),
        }
    }
}

/// Oracle precision `τ_δ = p_δ² / s_δ` from a known covariate density and
/// variance function.
pub fn tau_oracle(
    grid: &Grid,
    f_x: impl Fn(&[f64]) -> f64,
    sigma2: impl Fn(&[f64]) -> f64,
) -> Result<TauModel> {
    Ok(CellIntegrals::compute(grid, f_x, sigma2)?.tau(grid))
}

/// Split of the histogram estimate into its regression and noise parts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    /// Cell average of `m(X_j)`.
    pub m_hat_m: Vec<f64>,
    /// Cell average of `ε_j`.
    pub m_hat_eps: Vec<f64>,
    /// `n^{-1} Σ ε_j p_δ^{-1} 1{X_j ∈ cell}`: the noise part with the random
    /// count replaced by its expectation.
    pub m_tilde_eps: Vec<f64>,
    pub count: Vec<u64>,
}

/// Simulation-only diagnostic: requires the true regression function, the
/// realised errors and the true cell probabilities.
pub fn decompose(
    grid: &Grid,
    data: &Dataset,
    m: impl Fn(&[f64]) -> f64,
    eps: &[f64],
    p_delta: &[f64],
) -> Result<Decomposition> {
    if data.dim() != grid.dim() {
        return Err(domain("data dimension does not match grid dimension"));
    }
    if eps.len() != data.len() {
        return Err(domain(format!(
            "{} errors for {} observations",
            eps.len(),
            data.len()
        )));
    }
    if p_delta.len() != grid.cell_count() {
        return Err(domain(format!(
            "oracle cell probabilities missing: got {} values for {} cells",
            p_delta.len(),
            grid.cell_count()
        )));
    }
    let cells = grid.cell_count();
    let mut count = vec![0u64; cells];
    let mut sum_m = vec![0.0; cells];
    let mut sum_eps = vec![0.0; cells];
    for (x, &e) in data.xs().zip(eps) {
        let c = grid.locate(x)?;
        count[c] += 1;
        sum_m[c] += m(x);
        sum_eps[c] += e;
    }
    let n = data.len() as f64;
    let m_tilde_eps = sum_eps
        .iter()
        .zip(p_delta)
        .map(|(s, p)| s / (n * p))
        .collect();
    for c in 0..cells {
        if count[c] > 0 {
            let k = count[c] as f64;
            sum_m[c] /= k;
            sum_eps[c] /= k;
        }
    }
    Ok(Decomposition {
        m_hat_m: sum_m,
        m_hat_eps: sum_eps,
        m_tilde_eps,
        count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> (Grid, Dataset) {
        let g = Grid::new(1, 2).unwrap();
        let d = Dataset::new(1, vec![0.1, 0.2, 0.7], vec![1.0, 3.0, 5.0]).unwrap();
        (g, d)
    }

    #[test]
    fn fit_cell_averages() {
        let (g, d) = toy();
        let f = fit(&g, &d).unwrap();
        assert_eq!(f.mean_y, vec![2.0, 5.0]);
        assert_eq!(f.count, vec![2, 1]);
        assert_eq!(f.mean_y2, vec![5.0, 25.0]);
        assert_eq!(f.empty, vec![false, false]);
        assert_eq!(p_hat(&f), vec![2.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn empty_cells_are_zero_and_flagged() {
        let g = Grid::new(2, 3).unwrap();
        let d = Dataset::new(2, vec![0.1, 0.1, 0.2, 0.05, 0.3 - 1e-9, 0.0], vec![4.5; 3]).unwrap();
        let f = fit(&g, &d).unwrap();
        assert_eq!(f.mean_y[0], 4.5);
        assert_eq!(f.count[0], 3);
        for c in 1..9 {
            assert!(f.empty[c]);
            assert_eq!(f.mean_y[c], 0.0);
        }
        assert_eq!(p_hat(&f)[0], 1.0);

        let d = Dataset::new(2, vec![0.9, 0.4], vec![7.0]).unwrap();
        let f = fit(&g, &d).unwrap();
        let c = g.locate(&[0.9, 0.4]).unwrap();
        assert_eq!(f.mean_y[c], 7.0);
        assert_eq!(f.empty.iter().filter(|&&e| e).count(), 8);
    }

    #[test]
    fn dimension_mismatch_is_a_domain_error() {
        let g = Grid::new(2, 2).unwrap();
        let (_, d) = toy();
        assert!(matches!(fit(&g, &d), Err(Error::Domain(_))));
        assert!(Dataset::new(1, vec![1.2], vec![0.0]).is_err());
        assert!(Dataset::new(1, vec![], vec![]).is_err());
        assert!(Dataset::new(2, vec![0.1], vec![0.0]).is_err());
    }

    #[test]
    fn global_variance() {
        let (g, d) = toy();
        let f = fit(&g, &d).unwrap();
        let v = sigma2_global(&f, &d, DEFAULT_VARIANCE_FLOOR).unwrap();
        assert!((v.sigma2 - 2.0 / 3.0).abs() < 1e-15);
        assert!(!v.degenerate);

        let d = Dataset::new(1, vec![0.1, 0.8, 0.9], vec![3.0; 3]).unwrap();
        let f = fit(&g, &d).unwrap();
        assert_eq!(sigma2_global(&f, &d, DEFAULT_VARIANCE_FLOOR).unwrap().sigma2, 1e-8);

        // Piecewise-constant m on the grid, no noise.
        let g = Grid::new(1, 4).unwrap();
        let xs = vec![0.1, 0.2, 0.3, 0.6, 0.9, 0.95];
        let ys = xs.iter().map(|&x: &f64| [1.0, -2.0, 0.5, 4.0][(x * 4.0) as usize]).collect();
        let d = Dataset::new(1, xs, ys).unwrap();
        let f = fit(&g, &d).unwrap();
        assert_eq!(sigma2_global(&f, &d, 1e-8).unwrap().sigma2, 1e-8);
    }

    #[test]
    fn local_variance() {
        let g = Grid::new(1, 2).unwrap();
        let d = Dataset::new(1, vec![0.1, 0.2, 0.7], vec![1.0, 3.0, 5.0]).unwrap();
        let f = fit(&g, &d).unwrap();
        let v = sigma2_local(&f, DEFAULT_VARIANCE_FLOOR);
        assert_eq!(v.sigma2[0], Some(1.0));
        // Two-form identity on the {1,3} cell: ((1-2)² + (3-2)²)/2 = 1.
        assert_eq!(((1.0f64 - 2.0).powi(2) + (3.0f64 - 2.0).powi(2)) / 2.0, 1.0);
        assert_eq!(v.sigma2[1], Some(1e-8));
        assert_eq!(v.low_count, vec![false, true]);

        let d = Dataset::new(1, vec![0.1], vec![1.0]).unwrap();
        let v = sigma2_local(&fit(&g, &d).unwrap(), 1e-8);
        assert_eq!(v.sigma2, vec![Some(1e-8), None]);
    }

    #[test]
    fn plugin_tau() {
        let (g, d) = toy();
        let f = fit(&g, &d).unwrap();
        let local = LocalVariance {
            sigma2: vec![Some(1.0), Some(2.0)],
            low_count: vec![false, true],
        };
        let t = tau_plugin(&f, &VarianceModel::Local(local)).unwrap();
        assert!((t.tau[0].unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((t.tau[1].unwrap() - 1.0 / 6.0).abs() < 1e-15);

        let t = tau_plugin(&f, &VarianceModel::Homoscedastic(4.0)).unwrap();
        assert!((t.tau[1].unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!(tau_plugin(&f, &VarianceModel::Homoscedastic(0.0)).is_err());

        let d = Dataset::new(1, vec![0.1], vec![1.0]).unwrap();
        let f = fit(&g, &d).unwrap();
        let t = tau_plugin(&f, &VarianceModel::Homoscedastic(1.0)).unwrap();
        assert_eq!(t.tau[1], None);
        assert!(!t.is_defined(1));
        let local = sigma2_local(&f, 1e-8);
        let t = tau_plugin(&f, &VarianceModel::Local(local)).unwrap();
        assert_eq!(t.tau[1], None);
    }

    #[test]
    fn oracle_tau_constant_and_uniform() {
        let g = Grid::new(1, 10).unwrap();
        let t = tau_oracle(&g, |_| 1.0, |_| 4.0).unwrap();
        for v in &t.tau {
            assert!((v.unwrap() - 0.025).abs() < 1e-15);
        }
        // Homoscedastic uniform: τ = δ^p / σ².
        let g = Grid::new(2, 5).unwrap();
        let t = tau_oracle(&g, |_| 1.0, |_| 2.0).unwrap();
        for v in &t.tau {
            assert!((v.unwrap() - g.cell_volume() / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn oracle_tau_linear_variance() {
        // s = ∫_0^{1/2} (1+t) dt = 5/8 from the antiderivative t + t²/2.
        let antiderivative = |t: f64| t + 0.5 * t * t;
        let s_expected = antiderivative(0.5) - antiderivative(0.0);
        let g = Grid::new(1, 2).unwrap();
        let ints = CellIntegrals::compute(&g, |_| 1.0, |x| 1.0 + x[0]).unwrap();
        assert!((ints.p[0] - 0.5).abs() < 1e-15);
        assert!((ints.s[0] - s_expected).abs() < 1e-15);
        let t = ints.tau(&g);
        assert!((t.tau[0].unwrap() - 0.4).abs() < 1e-14);
        assert!((t.tau[1].unwrap() - 0.25 / (antiderivative(1.0) - antiderivative(0.5))).abs() < 1e-14);
    }

    #[test]
    fn oracle_cell_probability_bounds() {
        // f(x) = 0.5 + x on [0,1]²... per axis, so c_X = 0.25, C_X = 2.25.
        let g = Grid::new(2, 4).unwrap();
        let f = |x: &[f64]| (0.5 + x[0]) * (0.5 + x[1]);
        let ints = CellIntegrals::compute(&g, f, |_| 1.0).unwrap();
        let vol = g.cell_volume();
        for &p in &ints.p {
            assert!(0.25 * vol <= p && p <= 2.25 * vol);
        }
        assert!((ints.p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_rejects_nonpositive_integrals() {
        let g = Grid::new(1, 2).unwrap();
        assert!(matches!(tau_oracle(&g, |x| x[0] - 0.5, |_| 1.0), Err(Error::Numeric(_))));
    }

    #[test]
    fn decomposition_edge_cases() {
        let g = Grid::new(1, 4).unwrap();
        let xs = vec![0.1, 0.3, 0.35, 0.8];
        let m = |x: &[f64]| 2.0 * x[0];
        let ys: Vec<f64> = xs.iter().map(|&x| 2.0 * x).collect();
        let d = Dataset::new(1, xs.clone(), ys).unwrap();
        let p = vec![0.25; 4];
        let dec = decompose(&g, &d, m, &[0.0; 4], &p).unwrap();
        let f = fit(&g, &d).unwrap();
        assert_eq!(dec.m_hat_eps, vec![0.0; 4]);
        assert_eq!(dec.m_hat_m, f.mean_y);

        let eps = vec![0.5, -1.0, 2.0, 0.25];
        let d = Dataset::new(1, xs, eps.clone()).unwrap();
        let dec = decompose(&g, &d, |_| 0.0, &eps, &p).unwrap();
        assert_eq!(dec.m_hat_eps, fit(&g, &d).unwrap().mean_y);
        // m̃: n^{-1} Σ ε / p over cell 1 = (−1 + 2) / (4·0.25)
        assert!((dec.m_tilde_eps[1] - 1.0).abs() < 1e-15);

        assert!(decompose(&g, &d, |_| 0.0, &eps, &[]).is_err());
        assert!(decompose(&g, &d, |_| 0.0, &eps[..2], &p).is_err());
    }

    /// Reference fit by scanning every cell box for every observation.
    fn naive_fit(grid: &Grid, data: &Dataset) -> (Vec<u64>, Vec<f64>, Vec<f64>) {
        let mut count = vec![0; grid.cell_count()];
        let mut my = vec![0.0; grid.cell_count()];
        let mut my2 = vec![0.0; grid.cell_count()];
        for cell in grid.cells() {
            let (lo, hi) = grid.cell_box(&cell).unwrap();
            let (mut k, mut s, mut s2) = (0u64, 0.0, 0.0);
            for i in 0..data.len() {
                let inside = data.x(i).iter().enumerate().all(|(a, &v)| {
                    v >= lo[a] && (v < hi[a] || (hi[a] == 1.0 && v == 1.0))
                });
                if inside {
                    k += 1;
                    s += data.y(i);
                    s2 += data.y(i) * data.y(i);
                }
            }
            count[cell.linear] = k;
            if k > 0 {
                my[cell.linear] = s / k as f64;
                my2[cell.linear] = s2 / k as f64;
            }
        }
        (count, my, my2)
    }

    fn arb_instance() -> impl Strategy<Value = (Grid, Dataset)> {
        (1usize..=3, 1u64..=4, 1usize..=50).prop_flat_map(|(dim, inv, n)| {
            (
                proptest::collection::vec(
                    prop_oneof![0.0f64..=1.0, (0u64..=inv).prop_map(move |k| k as f64 / inv as f64)],
                    dim * n,
                ),
                proptest::collection::vec(-10.0f64..10.0, n),
            )
                .prop_map(move |(xs, ys)| {
                    (Grid::new(dim, inv).unwrap(), Dataset::new(dim, xs, ys).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn fit_matches_naive_reference((g, d) in arb_instance()) {
            let f = fit(&g, &d).unwrap();
            let (count, my, my2) = naive_fit(&g, &d);
            prop_assert_eq!(&f.count, &count);
            prop_assert_eq!(&f.mean_y, &my);
            prop_assert_eq!(&f.mean_y2, &my2);
        }

        #[test]
        fn fit_invariants((g, d) in arb_instance(), seed in any::<u64>()) {
            let f = fit(&g, &d).unwrap();
            prop_assert_eq!(f.count.iter().sum::<u64>() as usize, d.len());
            prop_assert!((f.p_hat().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for c in 0..g.cell_count() {
                prop_assert_eq!(f.empty[c], f.count[c] == 0);
                if f.empty[c] {
                    prop_assert_eq!(f.mean_y[c], 0.0);
                } else {
                    let tol = 1e-12 * f.mean_y2[c].max(1.0);
                    prop_assert!(f.mean_y2[c] + tol >= f.mean_y[c] * f.mean_y[c]);
                }
            }

            // Row order does not matter beyond rounding.
            let n = d.len();
            let mut order: Vec<usize> = (0..n).collect();
            let mut state = seed | 1;
            for i in (1..n).rev() {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                order.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let xs: Vec<f64> = order.iter().flat_map(|&i| d.x(i).to_vec()).collect();
            let ys: Vec<f64> = order.iter().map(|&i| d.y(i)).collect();
            let shuffled = fit(&g, &Dataset::new(d.dim(), xs, ys).unwrap()).unwrap();
            prop_assert_eq!(&shuffled.count, &f.count);
            for c in 0..g.cell_count() {
                prop_assert!((shuffled.mean_y[c] - f.mean_y[c]).abs() <= 1e-12);
                prop_assert!((shuffled.mean_y2[c] - f.mean_y2[c]).abs() <= 1e-12 * f.mean_y2[c].max(1.0));
            }
        }

        #[test]
        fn local_variance_two_forms_agree((g, d) in arb_instance()) {
            let f = fit(&g, &d).unwrap();
            let v = sigma2_local(&f, 0.0);
            let mut centered = vec![0.0; g.cell_count()];
            for i in 0..d.len() {
                let c = g.locate(d.x(i)).unwrap();
                centered[c] += (d.y(i) - f.mean_y[c]).powi(2);
            }
            for c in 0..g.cell_count() {
                match v.sigma2[c] {
                    None => prop_assert!(f.empty[c]),
                    Some(s2) => {
                        let direct = centered[c] / f.count[c] as f64;
                        prop_assert!((direct - s2).abs() <= 1e-10, "{} vs {}", direct, s2);
                    }
                }
            }
        }

        #[test]
        fn decomposition_identity((g, d) in arb_instance(), shift in -3.0f64..3.0) {
            let m = |x: &[f64]| shift + x.iter().sum::<f64>().sin();
            let eps: Vec<f64> = (0..d.len()).map(|i| d.y(i) - m(d.x(i))).collect();
            let p = vec![g.cell_volume(); g.cell_count()];
            let dec = decompose(&g, &d, m, &eps, &p).unwrap();
            let f = fit(&g, &d).unwrap();
            for c in 0..g.cell_count() {
                if !f.empty[c] {
                    prop_assert!((f.mean_y[c] - dec.m_hat_m[c] - dec.m_hat_eps[c]).abs() <= 1e-12);
                }
            }
        }
    }
}
