//! Seeded Monte Carlo engine.

pub mod experiments;
pub mod rng;
pub mod scenario;
pub mod stats;

pub use experiments::{
    approx_error_experiment, coverage_experiment, gauss_approx_experiment, phat_experiment, rate_experiment,
    ExperimentKind, ExperimentReport, ReplicationRecord, Runner, Summary,
};
pub use scenario::{CovariateSpec, MeshRule, NoiseSpec, RegressionSpec, Sample, Scenario, ScenarioAudit, ScenarioConfig};
