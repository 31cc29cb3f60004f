//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the exact model/PSR machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("enumeration of {required} states exceeds the cap of {cap} ({context})")]
    Capacity {
        required: usize,
        cap: usize,
        context: String,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("revealing condition fails at step {h}: sigma_min(M_h) = {sigma_min:.3e}")]
    RankDeficient { h: usize, sigma_min: f64 },

    #[error("decoder disagrees with the model on a positive-probability trajectory: {0}")]
    DecoderInconsistent(String),

    #[error("future-sufficiency constraint violated at step {h}: residual {residual:.3e}")]
    ConstraintViolation { h: usize, residual: f64 },

    #[error("empty action-sequence set at step {0}")]
    EmptyActionSet(usize),

    #[error("span dimension {found} exceeds the requested dimension {requested}")]
    RankExceeded { found: usize, requested: usize },

    #[error("matrix is not positive semi-definite (eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("saddle solver did not converge: duality gap {gap:.3e} after {iters} iterations")]
    SaddleNotConverged { gap: f64, iters: usize },

    #[error("confidence set became empty (numerically impossible with beta >= 0)")]
    EmptyConfidenceSet,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
