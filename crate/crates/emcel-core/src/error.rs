use thiserror::Error;

/// Errors surfaced by measure, scheme and simulation operations.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on the arguments was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative numerical procedure failed to converge or lost a
    /// guaranteed invariant (e.g. a monotone bracket without a root).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A scale-factor family produced a step leaving the state space.
    #[error("scheme integrity violation: {0}")]
    SchemeIntegrity(String),

    /// A path was queried beyond its simulated horizon.
    #[error("time {t} is beyond the simulated horizon {covered}")]
    OutOfHorizon { t: f64, covered: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
