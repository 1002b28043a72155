use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Conditioning on an event of probability zero.
    #[error("conditioning event has probability zero")]
    NullEvent,

    /// The distribution does not provide the requested capability.
    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),

    /// Sieve coefficients that do not induce a proper distribution.
    #[error("invalid sieve coefficients: {0}")]
    InvalidCoefficients(String),

    /// A quantile at 0 or 1 was requested; the support endpoint may be infinite.
    #[error("quantile requested at boundary probability {0}")]
    Boundary(f64),

    /// Inconsistent sizes or settings.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// No multistart produced a feasible point.
    #[error("estimation failed: {0}")]
    EstimationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
