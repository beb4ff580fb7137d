use std::path::PathBuf;

use crate::image::Shape;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: Shape, found: Shape },

    #[error("buffer of length {len} does not match shape {shape}")]
    BufferLength { shape: Shape, len: usize },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("image {shape} is too small: {reason}")]
    Dimension { shape: Shape, reason: &'static str },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Decode { path: PathBuf, message: String },

    #[error("pixel value {value} at index {index} is off the 1/255 grid")]
    OffGrid { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("degenerate correlation: {0}")]
    DegenerateCorrelation(&'static str),

    #[error("oracle transport: {0}")]
    Transport(String),

    #[error("oracle protocol: {0}")]
    Protocol(String),

    #[error("response id {got} does not match request id {expected}")]
    IdMismatch { expected: u64, got: u64 },

    #[error("oracle timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error("oracle reported: {0}")]
    Remote(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the scorer link rather than of the caller's input.
    pub fn is_oracle_failure(&self) -> bool {
        matches!(
            self,
            Error::Transport(_)
                | Error::Protocol(_)
                | Error::IdMismatch { .. }
                | Error::Timeout(_)
                | Error::Remote(_)
        )
    }
}
