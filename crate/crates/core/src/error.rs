use thiserror::Error;

/// Errors raised by the library.
///
/// The variants mirror the failure classes the command-line front end maps
/// onto exit codes: bad input, numerical breakdown and oracle trouble.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),
    /// Input data failed validation (non-SPD covariance, bad weights, ...).
    #[error("validation error: {0}")]
    Validation(String),
    /// A requested size exceeds what can be represented or afforded.
    #[error("capacity error: {0}")]
    Capacity(String),
    /// A factorization or solve broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The simulation oracle failed or is waiting on external responses.
    #[error("oracle error: {0}")]
    Oracle(String),
    /// Internal inconsistency between tables that should agree.
    #[error("internal error: {0}")]
    Internal(String),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
