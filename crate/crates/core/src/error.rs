use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs disagree on sizes or shapes.
    #[error("structural error: {0}")]
    Structural(String),

    /// The enumerated state space would exceed the configured limit.
    #[error("capacity exceeded: estimated {estimated:.3e} states, limit {limit:.3e}")]
    Capacity { estimated: f64, limit: f64 },

    /// An iterative procedure ran out of steps or search range.
    #[error("budget exhausted: {0}")]
    Budget(String),

    /// A computed object failed an internal consistency check.
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
