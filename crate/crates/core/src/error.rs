use std::path::PathBuf;

use thiserror::Error;

use crate::motion::AffineMotion;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("motion is not invertible (determinant {det})")]
    InvalidMotion { det: f64 },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("problem too large for the dense oracle: {n} pixels (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Sequential RANSAC found only one dominant motion.
    #[error("only one dominant motion found (second inlier fraction {second_fraction:.3})")]
    SingleMotion {
        motion: AffineMotion,
        second_fraction: f64,
    },

    #[error("degenerate mask: {0}")]
    DegenerateMask(String),

    #[error("invalid scene script: {0}")]
    Script(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}
