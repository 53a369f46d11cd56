use std::path::PathBuf;

use thiserror::Error;

use crate::convert::ConvertReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("sequencing error: expected frame for layer {expected}, got layer {got}")]
    Sequencing { expected: usize, got: usize },

    #[error("conversion refused: {}", .0.summary())]
    ConversionRefused(Box<ConvertReport>),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("checksum mismatch: header says {expected}, blob hashes to {actual}")]
    Checksum { expected: String, actual: String },

    #[error("unsupported container version {0}")]
    Version(u32),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("dataset not found: {0}")]
    DatasetMissing(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
