use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error(
        "conjugate gradient did not converge after {iters} iterations (residual {residual:e})"
    )]
    CgNotConverged { iters: usize, residual: f64 },

    #[error("newton iteration did not converge after {iters} iterations (residual {residual:e})")]
    NewtonNotConverged {
        iters: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("no sign change found after {expansions} bracket expansions")]
    NoBracket { expansions: usize },

    #[error("implicit step failed after {retries} retries with tau down to {tau:e}: {reason}")]
    StepFailed {
        retries: usize,
        tau: f64,
        reason: String,
    },

    #[error("malformed image {path}: {msg}")]
    Image { path: PathBuf, msg: String },

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
