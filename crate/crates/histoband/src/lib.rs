//! Histogram regression on an equidistant grid over `[0,1]^p` with
//! simultaneous confidence bands calibrated by the maximum of independent
//! Gaussians, plus a seeded Monte Carlo harness that checks the bands'
//! behaviour.
//!
//! ```
//! use histoband::{bands, estimators, grid::Grid};
//!
//! let grid = Grid::new(1, 2).unwrap();
//! let data = estimators::Dataset::new(1, vec![0.1, 0.2, 0.7], vec![1.0, 3.0, 5.0]).unwrap();
//! let fit = estimators::fit(&grid, &data).unwrap();
//! assert_eq!(fit.mean_y, vec![2.0, 5.0]);
//!
//! let tau = estimators::tau_plugin(&fit, &estimators::VarianceModel::Homoscedastic(1.0)).unwrap();
//! let band = bands::build_band(&fit, &tau, 0.05).unwrap();
//! assert!(band.lower(0) < 2.0 && band.upper(0) > 2.0);
//! ```

pub mod bands;
pub mod binomial;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod normal;
pub mod quadrature;
pub mod simulation;

pub use error::{Error, Result};
