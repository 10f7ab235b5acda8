use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A caller broke a documented precondition (wrong node class, mismatched dimensions).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singular matrix: non-positive pivot {pivot:e} at row {row}")]
    Singular { row: usize, pivot: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Trace exchange produced incomplete data (an exchange phase was skipped).
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("convergence factor undefined: {0}")]
    UndefinedFactor(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
