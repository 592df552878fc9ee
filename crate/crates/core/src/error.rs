use thiserror::Error;

use crate::bounds::BoundReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("not a density matrix: {0}")]
    InvalidState(String),

    #[error("invalid covariance matrix: {0}")]
    InvalidCovariance(String),

    #[error("singular covariance matrix (smallest/largest eigenvalue ratio {ratio:.3e})")]
    SingularCovariance { ratio: f64 },

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("every outcome has probability below the floor; measurement is degenerate")]
    DegenerateMeasurement,

    #[error("measurement carries no information about the phase (local error is zero)")]
    UninformativeMeasurement,

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("numerical consistency check failed: {0}")]
    NumericalConsistency(String),

    #[error(
        "bound violated: dephased QFI {:.17e} exceeds bound {:.17e}",
        .0.f_rho_bar.unwrap_or(f64::NAN),
        .0.main_bound
    )]
    BoundViolation(Box<BoundReport>),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
