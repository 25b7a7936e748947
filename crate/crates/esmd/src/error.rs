use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum EsmdError {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("{what} failed to converge: residual {residual:.3e} after {iterations} iterations")]
    Convergence {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },

    #[error("mirror descent diverged at iteration {iteration}: empirical risk {risk:.3e} exceeds {threshold:.3e}")]
    Divergence {
        iteration: u64,
        risk: f64,
        threshold: f64,
    },

    #[error("solver stopped at max iterations with duality gap {gap:.3e}")]
    PartialResult { gap: f64 },

    #[error("critical-radius bisection indeterminate: bracket [{lo:.6}, {hi:.6}] could not be resolved at the available sample budget")]
    Indeterminate { lo: f64, hi: f64 },

    #[error("continuous-time integration failed: {0}")]
    Integration(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EsmdError>;

impl EsmdError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        EsmdError::InvalidArgument(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        EsmdError::Unsupported(msg.into())
    }
}

/// Checks that a vector length matches the expected dimension.
pub fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(EsmdError::DimensionMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}
