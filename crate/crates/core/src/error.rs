use thiserror::Error;

/// Errors produced by the samplers, solvers and evaluators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("eigensolver failed: {message} (residuals: {residuals:?})")]
    Eigensolver { message: String, residuals: Vec<f64> },

    #[error("BESQ(0) path from {start} not absorbed after {steps} steps")]
    NotAbsorbed { start: f64, steps: usize },

    #[error("routes disagree: {route_a} vs {route_b} (combined stderr {stderr})")]
    Consistency {
        route_a: f64,
        route_b: f64,
        stderr: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Parameter(msg()))
    }
}
