//! Largest relative error of the empirical cell frequencies, scaled by
//! (ln n)^{3/2}, at a fixed mesh.

use histoband::estimators::{VarianceMode, DEFAULT_VARIANCE_FLOOR};
use histoband::simulation::{CovariateSpec, MeshRule, NoiseSpec, RegressionSpec, Runner, ScenarioConfig, Summary};

fn main() -> histoband::Result<()> {
    let runner = Runner::new(std::thread::available_parallelism().map_or(1, |n| n.get()))?;
    let config = ScenarioConfig {
        dim: 1,
        mesh: MeshRule::Fixed(10),
        n: 1000,
        regression: RegressionSpec::HolderBump { alpha: 1.0, c_h: 1.0 },
        noise: NoiseSpec::Gaussian { sigma: 1.0 },
        covariates: CovariateSpec::BetaMixture { uniform_weight: 0.3, a: 2.0, b: 5.0 },
        beta: 0.05,
        variance: VarianceMode::Oracle,
        replications: 50,
        seed: 17,
        probe_points: None,
        variance_floor: DEFAULT_VARIANCE_FLOOR,
    };
    let report = runner.phat(&config, &[50, 1_000, 10_000, 100_000, 1_000_000])?;
    let Summary::Phat(s) = &report.summary else { unreachable!() };
    for p in &s.points {
        let flag = if p.out_of_regime { "  (out of regime)" } else { "" };
        println!(
            "n = {:>8}  median max|p_hat/p - 1| = {:.4}  scaled = {:.4}{flag}",
            p.n, p.median_max_relative_error, p.scaled
        );
    }
    println!("decreasing over the largest sample sizes: {}", s.decreasing);
    Ok(())
}
