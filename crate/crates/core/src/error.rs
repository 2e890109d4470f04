//! Error type shared by every module of the crate.

use thiserror::Error;

use crate::fixedpoint::IterationTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain where an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A root-finding target lies outside the range of a strictly monotone map.
    #[error("range error: target {target} outside ({lo}, {hi})")]
    Range { target: f64, lo: f64, hi: f64 },

    /// A standing assumption on the marginals (support inclusion, density floor,
    /// convex order, irreducibility) does not hold.
    #[error("assumption violated: {0}")]
    Assumption(String),

    /// Quadrature or a linear solve produced a non-finite or singular result.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The derivative density has a non-positive lower bound.
    #[error("ellipticity violated: lower density bound {0} is not positive")]
    Ellipticity(f64),

    /// The iteration hit its cap; the partial trace is kept for reporting.
    #[error("no convergence after {iterations} iterations (last shift-minimised residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Box<IterationTrace>,
    },

    /// Malformed or arbitrageable market data.
    #[error("data error: {0}")]
    Data(String),

    /// A persisted file could not be parsed.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// A reloaded artifact failed re-verification.
    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn assumption(msg: impl Into<String>) -> Self {
        Error::Assumption(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
