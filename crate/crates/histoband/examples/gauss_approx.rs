//! Distance between the normalised noise maximum and the law of the
//! maximum of independent |N(0,1)| as the sample grows.

use histoband::estimators::{VarianceMode, DEFAULT_VARIANCE_FLOOR};
use histoband::simulation::{CovariateSpec, MeshRule, NoiseSpec, RegressionSpec, Runner, ScenarioConfig, Summary};

fn main() -> histoband::Result<()> {
    let runner = Runner::new(std::thread::available_parallelism().map_or(1, |n| n.get()))?;
    for noise in [
        NoiseSpec::Gaussian { sigma: 1.0 },
        NoiseSpec::Heteroscedastic { sigma0: 2.0_f64.sqrt() },
        NoiseSpec::ScaledT { sigma: 1.0, nu: 4 },
    ] {
        for n in [50, 500, 20_000] {
            let config = ScenarioConfig {
                dim: 1,
                mesh: MeshRule::Fixed(10),
                n,
                regression: RegressionSpec::HolderBump { alpha: 1.0, c_h: 1.0 },
                noise: noise.clone(),
                covariates: CovariateSpec::BetaMixture { uniform_weight: 0.5, a: 2.0, b: 2.0 },
                beta: 0.05,
                variance: VarianceMode::Oracle,
                replications: 1000,
                seed: 3,
                probe_points: None,
                variance_floor: DEFAULT_VARIANCE_FLOOR,
            };
            let report = runner.gauss_approx(&config)?;
            let Summary::GaussApprox(s) = &report.summary else { unreachable!() };
            let flag = if s.out_of_regime { " (out of regime)" } else { "" };
            println!("{noise:?} n={n}: KS {:.4}{flag}", s.ks_distance);
        }
    }
    Ok(())
}
