//! Simulation scenarios: regression function, noise law, covariate law and
//! grid, together with the symbolic bounds each law satisfies.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta as BetaLaw, Continuous};

use crate::error::{Error, Result};
use crate::estimators::{CellIntegrals, Dataset, TauModel, VarianceMode, DEFAULT_VARIANCE_FLOOR};
use crate::grid::Grid;

use super::rng::{stream, Stage};

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Regression function library.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegressionSpec {
    /// Constant on the cells of an `inv_mesh` grid. Without explicit
    /// `values`, cell `c` gets `amplitude · cos(1.7 c + 0.5)`.
    PiecewiseConstant {
        inv_mesh: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<f64>>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `intercept + slope · x`.
    Affine { intercept: f64, slope: Vec<f64> },
    /// `c_h · min_i |x_i − 1/2|^alpha`.
    HolderBump { alpha: f64, c_h: f64 },
}

fn one() -> f64 {
    1.0
}

/// Noise law. Every law has `E[ε | X] = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    /// `σ Z`.
    Gaussian { sigma: f64 },
    /// Student t with `nu + 1` degrees of freedom rescaled to variance `σ²`,
    /// so exactly the moments of order below `nu + 1` are finite.
    ScaledT { sigma: f64, nu: u32 },
    /// Gaussian with `σ²(x) = σ₀² (1 + x₁) / 2`.
    Heteroscedastic { sigma0: f64 },
}

/// Covariate law on `[0,1]^p`, independent across coordinates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateSpec {
    #[default]
    Uniform,
    /// Per coordinate: uniform with probability `uniform_weight`, otherwise
    /// `Beta(a, b)` with `a, b ≥ 1`. The uniform part keeps the density
    /// bounded below.
    BetaMixture { uniform_weight: f64, a: f64, b: f64 },
}

/// How the inverse mesh is chosen for a sample size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshRule {
    Fixed(u64),
    /// `δ = (n / ln n)^{-1/(2α + p)}`, rounded to the nearest integer inverse.
    Rate { alpha: f64 },
}

impl MeshRule {
    pub fn inv_mesh(&self, n: usize, dim: usize) -> Result<u64> {
        match *self {
            MeshRule::Fixed(m) if m > 0 => Ok(m),
            MeshRule::Fixed(_) => Err(config_err("fixed inverse mesh must be positive")),
            MeshRule::Rate { alpha } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(config_err(format!("rate rule alpha {alpha} not in (0,1]")));
                }
                if n < 3 {
                    return Err(config_err("rate rule needs n >= 3"));
                }
                let n = n as f64;
                let inv = (n / n.ln()).powf(1.0 / (2.0 * alpha + dim as f64));
                Ok((inv.round() as u64).max(1))
            }
        }
    }
}

fn default_beta() -> f64 {
    0.05
}

fn default_variance() -> VarianceMode {
    VarianceMode::Oracle
}

fn default_floor() -> f64 {
    DEFAULT_VARIANCE_FLOOR
}

/// Complete description of a Monte Carlo scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dim: usize,
    pub mesh: MeshRule,
    pub n: usize,
    pub regression: RegressionSpec,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub covariates: CovariateSpec,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_variance")]
    pub variance: VarianceMode,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Probe points per axis and cell for sup-norm checks; defaults to 1 for
    /// cell-constant regression functions and 8 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_points: Option<usize>,
    #[serde(default = "default_floor")]
    pub variance_floor: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(config_err("dim must be positive"));
        }
        if self.n == 0 {
            return Err(config_err("n must be positive"));
        }
        if self.replications == 0 {
            return Err(config_err("replications must be positive"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(config_err(format!("beta {} not in (0,1)", self.beta)));
        }
        if self.variance_floor.is_nan() || self.variance_floor <= 0.0 {
            return Err(config_err("variance_floor must be positive"));
        }
        Ok(())
    }

    pub fn probe_points(&self) -> usize {
        self.probe_points.unwrap_or(match self.regression {
            RegressionSpec::PiecewiseConstant { .. } => 1,
            _ => 8,
        })
    }
}

/// Regression function resolved for a dimension.
#[derive(Clone, Debug)]
pub enum Regression {
    PiecewiseConstant { grid: Grid, values: Vec<f64> },
    Affine { intercept: f64, slope: Vec<f64> },
    HolderBump { alpha: f64, c_h: f64 },
}

impl Regression {
    pub fn new(spec: &RegressionSpec, dim: usize) -> Result<Self> {
        match spec {
            RegressionSpec::PiecewiseConstant { inv_mesh, values, amplitude } => {
                let grid = Grid::new(dim, *inv_mesh)?;
                let values = match values {
                    Some(v) if v.len() == grid.cell_count() => v.clone(),
                    Some(v) => {
                        return Err(config_err(format!(
                            "piecewise_constant has {} values for {} cells",
                            v.len(),
                            grid.cell_count()
                        )))
                    }
                    None => (0..grid.cell_count())
                        .map(|c| amplitude * (1.7 * c as f64 + 0.5).cos())
                        .collect(),
                };
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(config_err("piecewise_constant values must be finite"));
                }
                Ok(Self::PiecewiseConstant { grid, values })
            }
            RegressionSpec::Affine { intercept, slope } => {
                if slope.len() != dim {
                    return Err(config_err(format!(
                        "affine slope has {} entries for dimension {dim}",
                        slope.len()
                    )));
                }
                Ok(Self::Affine {
                    intercept: *intercept,
                    slope: slope.clone(),
                })
            }
            RegressionSpec::HolderBump { alpha, c_h } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(config_err(format!("holder alpha {alpha} not in (0,1]")));
                }
                if !(*c_h > 0.0 && c_h.is_finite()) {
                    return Err(config_err("holder constant must be positive"));
                }
                Ok(Self::HolderBump {
                    alpha: *alpha,
                    c_h: *c_h,
                })
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::PiecewiseConstant { grid, values } => {
                values[grid.locate(x).expect("covariate inside the unit cube")]
            }
            Self::Affine { intercept, slope } => {
                intercept + slope.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
            }
            Self::HolderBump { alpha, c_h } => {
                let d = x.iter().map(|v| (v - 0.5).abs()).fold(f64::INFINITY, f64::min);
                c_h * d.powf(*alpha)
            }
        }
    }

    /// `(α, C_H)` with `m ∈ ℋ^α(C_H)`; `None` for discontinuous functions.
    pub fn holder(&self) -> Option<(f64, f64)> {
        match self {
            Self::PiecewiseConstant { .. } => None,
            Self::Affine { intercept, slope } => {
                let lipschitz = slope.iter().map(|b| b * b).sum::<f64>().sqrt();
                // |a + b·x| is maximised at a vertex of the cube.
                let hi = intercept + slope.iter().map(|b| b.max(0.0)).sum::<f64>();
                let lo = intercept + slope.iter().map(|b| b.min(0.0)).sum::<f64>();
                Some((1.0, lipschitz.max(hi.abs()).max(lo.abs())))
            }
            // sup |m| = c_h 2^{-α} ≤ c_h, and a minimum of α-Hölder maps
            // keeps the constant.
            Self::HolderBump { alpha, c_h } => Some((*alpha, *c_h)),
        }
    }

    /// Constant functions need no undersmoothing.
    fn is_constant(&self) -> bool {
        match self {
            Self::PiecewiseConstant { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
            Self::Affine { slope, .. } => slope.iter().all(|&b| b == 0.0),
            Self::HolderBump { .. } => false,
        }
    }
}

impl NoiseSpec {
    fn validate(&self) -> Result<()> {
        let sigma = match self {
            Self::Gaussian { sigma } | Self::ScaledT { sigma, .. } => *sigma,
            Self::Heteroscedastic { sigma0 } => *sigma0,
        };
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(config_err(format!("noise scale {sigma} must be finite and >= 0")));
        }
        if let Self::ScaledT { nu, .. } = self {
            if *nu < 2 {
                return Err(config_err("scaled_t needs nu >= 2 for a finite variance"));
            }
        }
        Ok(())
    }

    pub fn variance(&self, x: &[f64]) -> f64 {
        match self {
            Self::Gaussian { sigma } | Self::ScaledT { sigma, .. } => sigma * sigma,
            Self::Heteroscedastic { sigma0 } => sigma0 * sigma0 * (1.0 + x[0]) / 2.0,
        }
    }

    /// `(c_{σ²}, C_{σ²})`.
    pub fn variance_bounds(&self) -> (f64, f64) {
        match self {
            Self::Gaussian { sigma } | Self::ScaledT { sigma, .. } => (sigma * sigma, sigma * sigma),
            Self::Heteroscedastic { sigma0 } => (sigma0 * sigma0 / 2.0, sigma0 * sigma0),
        }
    }

    /// Largest integer `ν` with `E|ε|^ν < ∞`; `None` when all moments exist.
    pub fn moment_order(&self) -> Option<u32> {
        match self {
            Self::ScaledT { nu, .. } => Some(*nu),
            _ => None,
        }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng, x: &[f64]) -> f64 {
        match self {
            Self::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            Self::ScaledT { sigma, nu } => {
                let df = (*nu + 1) as f64;
                let t = StudentT::new(df).expect("df > 2").sample(rng);
                sigma * ((df - 2.0) / df).sqrt() * t
            }
            Self::Heteroscedastic { .. } => {
                self.variance(x).sqrt() * rng.sample::<f64, _>(StandardNormal)
            }
        }
    }
}

/// Covariate law resolved for sampling and density evaluation.
#[derive(Clone, Debug)]
pub enum Covariates {
    Uniform,
    BetaMixture {
        weight: f64,
        law: BetaLaw,
        sampler: rand_distr::Beta<f64>,
        pdf_range: (f64, f64),
    },
}

impl Covariates {
    pub fn new(spec: &CovariateSpec) -> Result<Self> {
        match *spec {
            CovariateSpec::Uniform => Ok(Self::Uniform),
            CovariateSpec::BetaMixture { uniform_weight, a, b } => {
                if !(uniform_weight > 0.0 && uniform_weight <= 1.0) {
                    return Err(config_err("uniform_weight must lie in (0,1]"));
                }
                if !(a >= 1.0 && b >= 1.0 && a.is_finite() && b.is_finite()) {
                    return Err(config_err("beta_mixture needs finite a, b >= 1"));
                }
                let law = BetaLaw::new(a, b).map_err(|e| config_err(e.to_string()))?;
                let sampler = rand_distr::Beta::new(a, b).map_err(|e| config_err(e.to_string()))?;
                // Unimodal for a, b ≥ 1: minimum at an endpoint, maximum at the mode.
                let lo = law.pdf(0.0).min(law.pdf(1.0));
                let hi = if a + b > 2.0 {
                    law.pdf((a - 1.0) / (a + b - 2.0))
                } else {
                    1.0
                };
                Ok(Self::BetaMixture {
                    weight: uniform_weight,
                    law,
                    sampler,
                    pdf_range: (lo, hi),
                })
            }
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            Self::Uniform => 1.0,
            Self::BetaMixture { weight, law, .. } => x
                .iter()
                .map(|&v| weight + (1.0 - weight) * law.pdf(v))
                .product(),
        }
    }

    /// `(c_X, C_X)` for dimension `dim`.
    pub fn density_bounds(&self, dim: usize) -> (f64, f64) {
        match self {
            Self::Uniform => (1.0, 1.0),
            Self::BetaMixture { weight, pdf_range: (lo, hi), .. } => {
                let axis_lo = weight + (1.0 - weight) * lo;
                let axis_hi = weight + (1.0 - weight) * hi;
                (axis_lo.powi(dim as i32), axis_hi.powi(dim as i32))
            }
        }
    }

    pub fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            Self::Uniform => out.iter_mut().for_each(|v| *v = rng.random::<f64>()),
            Self::BetaMixture { weight, sampler, .. } => {
                for v in out {
                    *v = if rng.random::<f64>() < *weight {
                        rng.random::<f64>()
                    } else {
                        sampler.sample(rng)
                    };
                }
            }
        }
    }
}

/// Constants of the scenario's distributional assumptions plus the
/// undersmoothing diagnostics at its sample size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioAudit {
    pub n: usize,
    pub inv_mesh: u64,
    pub cells: usize,
    pub c_x: f64,
    pub upper_c_x: f64,
    pub c_sigma2: f64,
    pub upper_c_sigma2: f64,
    pub holder_alpha: Option<f64>,
    pub holder_c_h: Option<f64>,
    /// `None`: every moment of the noise is finite.
    pub moment_order: Option<u32>,
    /// `n δ^{2α+p} (ln n)²`, for nonconstant Hölder `m`.
    pub bias_condition: Option<f64>,
    /// `(ln n)^5 / (δ^p n^{1 − 2/ν})`.
    pub moment_condition: f64,
    pub warnings: Vec<String>,
}

impl ScenarioAudit {
    /// Warnings for the two conditions a coverage guarantee needs beyond the
    /// distributional assumptions.
    pub fn undersmoothing_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        if let Some(b) = self.bias_condition.filter(|&b| b >= 1.0) {
            warnings.push(format!("undersmoothing: n δ^(2α+p) (ln n)^2 = {b:.3} is not small (< 1)"));
        }
        if self.moment_condition >= 0.1 {
            warnings.push(format!(
                "cell occupancy: (ln n)^5 / (δ^p n^(1-2/ν)) = {:.3} is not small (< 0.1)",
                self.moment_condition
            ));
        }
        warnings
    }
}

/// A scenario resolved at one sample size.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub n: usize,
    /// Index of this sample size within a sweep; part of the RNG key.
    pub point: u64,
    pub grid: Grid,
    pub regression: Regression,
    pub covariates: Covariates,
    /// True cell probabilities `p_δ`.
    pub p_delta: Vec<f64>,
    /// `p_δ² / s_δ`; `None` when the noise variance vanishes somewhere.
    pub oracle_tau: Option<TauModel>,
}

/// One simulated sample with its ground truth.
#[derive(Clone, Debug)]
pub struct Sample {
    pub data: Dataset,
    pub m_values: Vec<f64>,
    pub eps: Vec<f64>,
}

impl Scenario {
    pub fn new(config: &ScenarioConfig, n: usize, point: u64) -> Result<Self> {
        config.validate()?;
        config.noise.validate()?;
        let inv_mesh = config.mesh.inv_mesh(n, config.dim)?;
        let grid = Grid::new(config.dim, inv_mesh)?;
        let regression = Regression::new(&config.regression, config.dim)?;
        let covariates = Covariates::new(&config.covariates)?;
        let (c_sigma2, _) = config.noise.variance_bounds();
        let (p_delta, oracle_tau) = if c_sigma2 > 0.0 {
            let ints = CellIntegrals::compute(&grid, |x| covariates.density(x), |x| config.noise.variance(x))?;
            let tau = ints.tau(&grid);
            (ints.p, Some(tau))
        } else {
            let ints = CellIntegrals::compute(&grid, |x| covariates.density(x), |_| 1.0)?;
            (ints.p, None)
        };
        Ok(Self {
            config: config.clone(),
            n,
            point,
            grid,
            regression,
            covariates,
            p_delta,
            oracle_tau,
        })
    }

    pub fn m(&self, x: &[f64]) -> f64 {
        self.regression.eval(x)
    }

    /// Covariates of replication `r`, row-major.
    pub fn generate_covariates(&self, r: u64) -> Vec<f64> {
        let dim = self.config.dim;
        let mut rng = stream(self.config.seed, self.point, r, Stage::Covariates);
        let mut xs = vec![0.0; self.n * dim];
        for x in xs.chunks_exact_mut(dim) {
            self.covariates.sample_into(&mut rng, x);
        }
        xs
    }

    /// Draws replication `r`: covariates and noise come from separate
    /// streams keyed by `(seed, point, r)`.
    pub fn generate(&self, r: u64) -> Result<Sample> {
        let dim = self.config.dim;
        let xs = self.generate_covariates(r);
        let mut rng = stream(self.config.seed, self.point, r, Stage::Noise);
        let mut ys = Vec::with_capacity(self.n);
        let mut m_values = Vec::with_capacity(self.n);
        let mut eps = Vec::with_capacity(self.n);
        for x in xs.chunks_exact(dim) {
            let e = self.config.noise.draw(&mut rng, x);
            let m = self.m(x);
            m_values.push(m);
            eps.push(e);
            ys.push(m + e);
        }
        Ok(Sample {
            data: Dataset::new(dim, xs, ys)?,
            m_values,
            eps,
        })
    }

    pub fn audit(&self) -> ScenarioAudit {
        let dim = self.config.dim;
        let (c_x, upper_c_x) = self.covariates.density_bounds(dim);
        let (c_sigma2, upper_c_sigma2) = self.config.noise.variance_bounds();
        let holder = self.regression.holder();
        let moment_order = self.config.noise.moment_order();
        let n = self.n as f64;
        let ln_n = n.ln();
        let delta = self.grid.mesh();
        let vol = self.grid.cell_volume();
        let bias_condition = holder
            .filter(|_| !self.regression.is_constant())
            .map(|(alpha, _)| n * delta.powf(2.0 * alpha + dim as f64) * ln_n * ln_n);
        let moment_exponent = 1.0 - moment_order.map_or(0.0, |nu| 2.0 / nu as f64);
        let moment_condition = ln_n.powi(5) / (vol * n.powf(moment_exponent));

        let mut warnings = Vec::new();
        if !(c_x > 0.0 && upper_c_x.is_finite()) {
            warnings.push(format!("covariate density bounds [{c_x}, {upper_c_x}] not in (0, inf)"));
        }
        if c_sigma2.is_nan() || c_sigma2 <= 0.0 {
            warnings.push("noise variance is not bounded away from zero".to_string());
        }
        if moment_order.is_some_and(|nu| nu < 4) {
            warnings.push("noise has fewer than four finite moments".to_string());
        }
        if holder.is_none() && !self.regression.is_constant() {
            warnings.push(
                "regression function is not Hölder; coverage relies on the grid being aligned with its jumps"
                    .to_string(),
            );
        }
        ScenarioAudit {
            n: self.n,
            inv_mesh: self.grid.inv_mesh(),
            cells: self.grid.cell_count(),
            c_x,
            upper_c_x,
            c_sigma2,
            upper_c_sigma2,
            holder_alpha: holder.map(|h| h.0),
            holder_c_h: holder.map(|h| h.1),
            moment_order,
            bias_condition,
            moment_condition,
            warnings,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ScenarioConfig {
        ScenarioConfig {
            dim: 1,
            mesh: MeshRule::Fixed(10),
            n: 1000,
            regression: RegressionSpec::HolderBump { alpha: 1.0, c_h: 1.0 },
            noise: NoiseSpec::Gaussian { sigma: 1.0 },
            covariates: CovariateSpec::Uniform,
            beta: 0.1,
            variance: VarianceMode::Oracle,
            replications: 1,
            seed: 3,
            probe_points: None,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
        }
    }

    #[test]
    fn config_json_round_trip_and_unknown_fields() {
        let cfg = base();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);

        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ScenarioConfig>(v).is_err());

        let bad_noise = json.replace("\"sigma\":1.0", "\"sigma\":1.0,\"extra\":2");
        assert!(serde_json::from_str::<ScenarioConfig>(&bad_noise).is_err());

        let rule: MeshRule = serde_json::from_str(r#"{"rate":{"alpha":1.0}}"#).unwrap();
        assert_eq!(rule, MeshRule::Rate { alpha: 1.0 });
    }

    #[test]
    fn mesh_rule() {
        let rule = MeshRule::Rate { alpha: 1.0 };
        // (2000 / ln 2000)^{1/3} = 6.41
        assert_eq!(rule.inv_mesh(2000, 1).unwrap(), 6);
        // (250000 / ln 250000)^{1/3} = 27.2
        assert_eq!(rule.inv_mesh(250_000, 1).unwrap(), 27);
        assert!(MeshRule::Fixed(0).inv_mesh(10, 1).is_err());
        assert!(MeshRule::Rate { alpha: 1.5 }.inv_mesh(100, 1).is_err());
    }

    #[test]
    fn zero_noise_reproduces_m() {
        let mut cfg = base();
        cfg.noise = NoiseSpec::Gaussian { sigma: 0.0 };
        let s = Scenario::new(&cfg, 500, 0).unwrap();
        assert!(s.oracle_tau.is_none());
        let sample = s.generate(0).unwrap();
        for i in 0..500 {
            assert_eq!(sample.data.y(i), s.m(sample.data.x(i)));
        }
        assert!(s.audit().warnings.iter().any(|w| w.contains("bounded away")));
    }

    #[test]
    fn uniform_frequencies_match_cell_volume() {
        let mut cfg = base();
        cfg.dim = 2;
        cfg.mesh = MeshRule::Fixed(4);
        let n = 100_000;
        let s = Scenario::new(&cfg, n, 0).unwrap();
        let sample = s.generate(0).unwrap();
        let fit = crate::estimators::fit(&s.grid, &sample.data).unwrap();
        let p = 1.0 / 16.0;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        for f in fit.p_hat() {
            assert!((f - p).abs() < 4.0 * se, "{f}");
        }
    }

    #[test]
    fn scaled_t_variance() {
        let mut cfg = base();
        cfg.noise = NoiseSpec::ScaledT { sigma: 1.5, nu: 4 };
        let s = Scenario::new(&cfg, 1_000_000, 0).unwrap();
        let sample = s.generate(0).unwrap();
        let var = sample.eps.iter().map(|e| e * e).sum::<f64>() / sample.eps.len() as f64;
        assert!((var / 2.25 - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn heteroscedastic_variance_function() {
        let noise = NoiseSpec::Heteroscedastic { sigma0: 2.0_f64.sqrt() };
        assert!((noise.variance(&[0.0]) - 1.0).abs() < 1e-15);
        assert!((noise.variance(&[1.0]) - 2.0).abs() < 1e-15);
        assert_eq!(noise.variance_bounds(), (1.0000000000000002, 2.0000000000000004));
    }

    #[test]
    fn symbolic_bounds_hold_on_a_fine_grid() {
        let specs = [
            CovariateSpec::Uniform,
            CovariateSpec::BetaMixture { uniform_weight: 0.5, a: 2.0, b: 2.0 },
            CovariateSpec::BetaMixture { uniform_weight: 0.3, a: 1.0, b: 3.0 },
            CovariateSpec::BetaMixture { uniform_weight: 0.8, a: 2.5, b: 1.5 },
        ];
        for spec in &specs {
            let cov = Covariates::new(spec).unwrap();
            let (lo, hi) = cov.density_bounds(2);
            assert!(lo > 0.0);
            for i in 0..=200 {
                for j in 0..=20 {
                    let x = [i as f64 / 200.0, j as f64 / 20.0];
                    let f = cov.density(&x);
                    assert!(f >= lo * (1.0 - 1e-12) && f <= hi * (1.0 + 1e-12), "{spec:?} {x:?}");
                }
            }
            // Density integrates to one; non-integer Beta exponents leave a
            // small quadrature error at the boundary cells.
            let g = Grid::new(2, 4).unwrap();
            let ints = CellIntegrals::compute(&g, |x| cov.density(x), |_| 1.0).unwrap();
            assert!((ints.p.iter().sum::<f64>() - 1.0).abs() < 1e-4, "{spec:?}");
        }

        for reg in [
            RegressionSpec::HolderBump { alpha: 0.5, c_h: 2.0 },
            RegressionSpec::Affine { intercept: -0.3, slope: vec![0.4, -1.2] },
        ] {
            let r = Regression::new(&reg, 2).unwrap();
            let (alpha, c_h) = r.holder().unwrap();
            let pts: Vec<[f64; 2]> = (0..=40)
                .flat_map(|i| (0..=40).map(move |j| [i as f64 / 40.0, j as f64 / 40.0]))
                .collect();
            for a in &pts {
                assert!(r.eval(a).abs() <= c_h + 1e-12);
                for b in pts.iter().step_by(7) {
                    let dist = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                    assert!((r.eval(a) - r.eval(b)).abs() <= c_h * dist.powf(alpha) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn mixture_samples_follow_density() {
        let mut cfg = base();
        cfg.covariates = CovariateSpec::BetaMixture { uniform_weight: 0.4, a: 2.0, b: 2.0 };
        let n = 200_000;
        let s = Scenario::new(&cfg, n, 0).unwrap();
        let fit = crate::estimators::fit(&s.grid, &s.generate(1).unwrap().data).unwrap();
        for (ph, p) in fit.p_hat().iter().zip(&s.p_delta) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((ph - p).abs() < 4.5 * se);
        }
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = base();
        cfg.beta = 1.0;
        assert!(Scenario::new(&cfg, 10, 0).is_err());
        let mut cfg = base();
        cfg.regression = RegressionSpec::PiecewiseConstant { inv_mesh: 2, values: Some(vec![1.0]), amplitude: 1.0 };
        assert!(matches!(Scenario::new(&cfg, 10, 0), Err(Error::Config(_))));
        let mut cfg = base();
        cfg.noise = NoiseSpec::ScaledT { sigma: 1.0, nu: 1 };
        assert!(Scenario::new(&cfg, 10, 0).is_err());
        let mut cfg = base();
        cfg.covariates = CovariateSpec::BetaMixture { uniform_weight: 0.0, a: 2.0, b: 2.0 };
        assert!(Scenario::new(&cfg, 10, 0).is_err());
    }
}
