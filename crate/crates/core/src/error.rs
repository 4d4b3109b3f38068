use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("drift points outward at boundary node {node} (K = {k}); enlarge the domain")]
    OutwardDrift { node: usize, k: f64 },

    #[error("state {value} left the domain [{lo}, {hi}] at t = {t}")]
    LeftDomain {
        t: f64,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("no sign change: {0}")]
    NoRoot(String),

    #[error("fixed-point iteration failed to contract after {iterations} iterations (|W| = {residual:e})")]
    NoContraction { iterations: usize, residual: f64 },

    #[error("no interior maximum in [{lo}, {hi}]")]
    NoInteriorMaximum { lo: f64, hi: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        field,
        reason: reason.into(),
    }
}
