//! Sup-norm error of the estimator along the rate-optimal mesh rule, with
//! the fitted log-log slope against n / ln n.

use histoband::estimators::{VarianceMode, DEFAULT_VARIANCE_FLOOR};
use histoband::simulation::{CovariateSpec, MeshRule, NoiseSpec, RegressionSpec, Runner, ScenarioConfig, Summary};

fn main() -> histoband::Result<()> {
    let runner = Runner::new(std::thread::available_parallelism().map_or(1, |n| n.get()))?;
    for dim in [1usize, 2] {
        let config = ScenarioConfig {
            dim,
            mesh: MeshRule::Rate { alpha: 1.0 },
            n: 2000,
            regression: RegressionSpec::HolderBump { alpha: 1.0, c_h: 1.0 },
            noise: NoiseSpec::Gaussian { sigma: 1.0 },
            covariates: CovariateSpec::Uniform,
            beta: 0.05,
            variance: VarianceMode::Oracle,
            replications: 20,
            seed: 7,
            probe_points: None,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
        };
        let report = runner.rate(&config, &[2_000, 10_000, 50_000, 250_000])?;
        let Summary::Rate(s) = &report.summary else { unreachable!() };
        println!("p = {dim}");
        for p in &s.points {
            println!("  n = {:>7}  1/delta = {:>3}  median sup error = {:.4}", p.n, p.inv_mesh, p.median_sup_error);
        }
        let fit = s.fit.expect("errors are positive");
        println!(
            "  slope {:.4} [{:.4}, {:.4}], theory {:.4}",
            fit.slope,
            fit.ci.lower,
            fit.ci.upper,
            s.theoretical_slope.unwrap()
        );
    }
    Ok(())
}
