use std::path::PathBuf;

/// Errors produced by the core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("expected a {expected}-channel frame, got {actual} channel(s)")]
    ChannelMismatch { expected: u8, actual: u8 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("kernel dimensions must be odd, got {width}x{height}")]
    EvenKernel { width: usize, height: usize },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("need at least 4 correspondences, got {0}")]
    TooFewMatches(usize),

    #[error("no non-degenerate sample found in {0} iterations")]
    DegenerateSample(usize),

    #[error("point maps to the plane at infinity")]
    PointAtInfinity,

    #[error("invalid quad: {0}")]
    InvalidQuad(String),

    #[error("decode failed for {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
