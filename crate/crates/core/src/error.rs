use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("size mismatch: header promises {expected} payload bytes, file holds {found}")]
    SizeMismatch { expected: u64, found: u64 },

    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: [usize; 3], right: [usize; 3] },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported IoU threshold {0}: matching requires a value in (0.5, 1]")]
    UnsupportedThreshold(f64),

    #[error("degenerate target: foreground ratio {0} leaves one class empty")]
    DegenerateTarget(f64),

    #[error("slice {slice} has no neighbor on both sides in a volume of depth {depth}")]
    MissingNeighbor { slice: usize, depth: usize },

    #[error("label overflow: {0}")]
    LabelOverflow(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the caller's inputs rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::LabelOverflow(_))
    }
}
