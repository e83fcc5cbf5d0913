use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("capacity exceeded: {what} = {requested} > limit {limit}")]
    Capacity {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no convergence after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },

    #[error("tree structure: {0}")]
    Structure(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

impl Error {
    /// Errors that stem from numerics or configured capacity rather than
    /// from malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Capacity { .. } | Error::NonConvergence { .. })
    }
}
