use thiserror::Error;

/// Errors produced by the model, integrator and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid mode index: {0}")]
    InvalidIndex(String),

    #[error("trajectory is not a pure vertical mode: {0}")]
    NotVerticalMode(String),

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("monodromy determinant {determinant} deviates from 1 by more than {tolerance}")]
    DeterminantDrift { determinant: f64, tolerance: f64 },

    #[error("bracket does not straddle the threshold (lo unstable: {lo_unstable}, hi unstable: {hi_unstable})")]
    BracketNotStraddling {
        lo_unstable: bool,
        hi_unstable: bool,
    },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("empty trajectory")]
    EmptyTrajectory,
}

pub type Result<T> = std::result::Result<T, Error>;
