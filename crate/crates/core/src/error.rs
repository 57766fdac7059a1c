use std::io;

use thiserror::Error;

/// Errors produced by the solver library and the command line front-end.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments or violated preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of range for dimension {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    /// No squared-norm distribution exists over an all-zero matrix.
    #[error("matrix has no nonzero entries")]
    ZeroMatrix,

    #[error("row {0} has zero norm; its entry distribution is undefined")]
    ZeroRow(usize),

    /// The solution vector is (numerically) zero so nothing can be sampled from it.
    #[error("degenerate solution: {0}")]
    Degenerate(String),

    #[error("rejection sampler gave up after {cap} rounds (phi = {phi})")]
    RejectionCap { cap: usize, phi: f64 },

    #[error("iterative solve did not converge after {iterations} iterations (relative residual {rel_residual:e})")]
    NoConvergence {
        iterations: usize,
        rel_residual: f64,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code for the command line front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::IndexOutOfRange { .. } => 2,
            Error::NonFinite(_)
            | Error::ZeroMatrix
            | Error::ZeroRow(_)
            | Error::Degenerate(_)
            | Error::RejectionCap { .. }
            | Error::NoConvergence { .. } => 3,
            Error::Parse { .. } | Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
