//! Precision limits for phase estimation with N subsystems under arbitrarily
//! correlated Gaussian dephasing.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: density matrices, diagonal local generators, phase encoding
//!   and reference states.
//! - [`covariance`]: random-phase covariance matrices, the effective variance
//!   `Δ²_C = (1ᵀC⁻¹1)⁻¹` and the optimal averaging weights.
//! - [`dephasing`]: the exact Gaussian dephasing channel and a Monte Carlo
//!   sampler of the same channel.
//! - [`fisher`]: symmetric logarithmic derivative, quantum and classical
//!   Fisher information, the optimal projective measurement.
//! - [`bayes`]: Bayesian random-phase estimators, the locally unbiased
//!   rescaled estimator and a seeded experiment simulator.
//! - [`bounds`]: the dephasing upper bound on the Fisher information, its
//!   specialisations, the comparison bound and asymptotic scaling.
//! - [`report`]: CSV / JSON encodings of [`bounds::BoundReport`].

// `!(x >= 0.0)` rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod bounds;
pub mod covariance;
pub mod dephasing;
mod error;
pub mod fisher;
pub mod linalg;
pub mod report;
mod sampling;

pub use error::{Error, Result};

pub use bayes::ExperimentConfig;
pub use bounds::{BoundReport, Family};
pub use covariance::CovarianceMatrix;
pub use fisher::Povm;
pub use linalg::{DensityMatrix, GeneratorSpec, HermitianOperator};
