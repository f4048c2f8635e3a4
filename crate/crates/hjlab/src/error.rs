//! Shared error type for the crate.

/// Errors reported by constructors, solvers, and diagnostics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on the inputs failed.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A time step violates the stability restriction of a monotone scheme.
    #[error("CFL violation: dt = {dt:.3e} exceeds the stable limit {max_dt:.3e}")]
    CflViolation { dt: f64, max_dt: f64 },

    /// An optimization or search hit the edge of its search window.
    #[error("window too small: {0}")]
    WindowTooSmall(String),

    /// An iterative method failed to reach its tolerance.
    #[error("did not converge: {0}")]
    NotConverged(String),

    /// The request is outside what the solvers support.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An internal invariant failed (e.g. a bracketing assumption).
    #[error("internal error: {0}")]
    Internal(String),

    /// Resource guard tripped before launching an oversized computation.
    #[error("refusing oversized run: {0}")]
    TooLarge(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
