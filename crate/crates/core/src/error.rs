use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {off_diagonal:e})")]
    EigenNoConvergence { sweeps: usize, off_diagonal: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("empty block for times ({t0}, {t1}) at n = {n}; increase n")]
    EmptyBlock { t0: f64, t1: f64, n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing oracle: {0}")]
    MissingOracle(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by the mathematics of the input (non-PD
    /// targets, violated hypotheses), as opposed to malformed configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite(_)
                | Error::EigenNoConvergence { .. }
                | Error::HypothesisViolation(_)
                | Error::Numerical(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
