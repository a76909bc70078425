use std::path::PathBuf;

use crate::imaging::ColorSpace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("conversion from {0:?} is not supported (source must be RGB)")]
    UnsupportedSource(ColorSpace),

    #[error("rectangle x={x} y={y} w={w} h={h} exceeds {width}x{height} image")]
    RectOutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    #[error("sampling window at ({x}, {y}) with scale {scale} exits the image")]
    WindowOutOfBounds { x: usize, y: usize, scale: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty region: {0}")]
    EmptyRegion(&'static str),

    #[error("no valid sample positions")]
    NoSamplePositions,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite value in sample {0}")]
    NonFinite(usize),

    #[error("SMO did not converge after {iterations} iterations (max violation {violation:.3e})")]
    NotConverged { iterations: usize, violation: f64 },

    #[error("model was trained against a different codebook")]
    FingerprintMismatch,

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("label error: {0}")]
    Labels(String),

    #[error("failed to encode {} file(s): {}", .0.len(), .0.iter().map(|(p, e)| format!("{}: {e}", p.display())).collect::<Vec<_>>().join("; "))]
    Encoding(Vec<(PathBuf, String)>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }

    /// True for errors caused by the user's configuration rather than by the data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidParameter(_) | Error::FingerprintMismatch
        )
    }
}
