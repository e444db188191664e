//! Monte Carlo coverage of oracle and plug-in bands for a regression
//! function that is constant on the grid cells.

use histoband::estimators::{VarianceMode, DEFAULT_VARIANCE_FLOOR};
use histoband::simulation::{CovariateSpec, MeshRule, NoiseSpec, RegressionSpec, Runner, ScenarioConfig, Summary};

fn main() -> histoband::Result<()> {
    let runner = Runner::new(std::thread::available_parallelism().map_or(1, |n| n.get()))?;
    for variance in [VarianceMode::Oracle, VarianceMode::Global, VarianceMode::Local] {
        for beta in [0.05, 0.1, 0.5] {
            let config = ScenarioConfig {
                dim: 1,
                mesh: MeshRule::Fixed(10),
                n: 20_000,
                regression: RegressionSpec::PiecewiseConstant { inv_mesh: 10, values: None, amplitude: 1.0 },
                noise: NoiseSpec::Gaussian { sigma: 1.0 },
                covariates: CovariateSpec::Uniform,
                beta,
                variance,
                replications: 500,
                seed: 1,
                probe_points: None,
                variance_floor: DEFAULT_VARIANCE_FLOOR,
            };
            let report = runner.coverage(&config)?;
            let Summary::Coverage(s) = &report.summary else { unreachable!() };
            println!(
                "{variance:?} beta={beta}: coverage {:.3} [{:.3}, {:.3}] (nominal {:.2})",
                s.coverage,
                s.ci.lower,
                s.ci.upper,
                1.0 - beta
            );
        }
    }
    Ok(())
}
