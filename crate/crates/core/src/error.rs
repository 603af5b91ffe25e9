use std::io;

use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("insufficient data: need at least {needed} snapshots, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("phase branch wrap at {points} point(s) (largest step {max_step:.3} rad); reduce dt")]
    BranchWrap { points: usize, max_step: f64 },

    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("unreliable statistics: {excluded:.1}% of members excluded (limit 20%)")]
    UnreliableStatistics { excluded: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
