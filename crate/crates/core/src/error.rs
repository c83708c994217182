use std::io;

use thiserror::Error;

use crate::erp_cov::Label;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e}, scale {scale:e})")]
    NotSymmetric { asymmetry: f64, scale: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e}, largest {max_eigenvalue:e})")]
    NotPositiveDefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("mean solver did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NoConvergence {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("covariance trace is zero; shrinkage target is undefined")]
    DegenerateTrace,

    #[error("class {label} has {found} trial(s), at least {required} required")]
    ClassCoverage {
        label: Label,
        found: usize,
        required: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown protocol `{name}` (valid: {valid})")]
    UnknownProtocol { name: String, valid: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format(_) => 2,
            Error::ClassCoverage { .. } => 3,
            Error::DimensionMismatch { .. } => 4,
            Error::UnknownProtocol { .. } => 5,
            Error::InvalidConfig(_) => 6,
            _ => 1,
        }
    }
}
