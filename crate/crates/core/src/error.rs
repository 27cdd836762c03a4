use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point {z} outside the analyticity domain: {reason}")]
    Domain { z: crate::C64, reason: String },

    #[error("assumption {name} violated: {detail}")]
    Assumption { name: &'static str, detail: String },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("potential grows too slowly: {0}")]
    SlowGrowth(String),

    #[error("non-finite kernel value at ({x}, {y})")]
    NonFinite { x: f64, y: f64 },

    #[error("{0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of an iterative solver, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::Degenerate(_))
    }
}
