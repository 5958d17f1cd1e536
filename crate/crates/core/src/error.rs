use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or image shapes disagree.
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid parameters, flags or preconditions.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed file contents.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Dataset contents fail an integrity check.
    #[error("data error: {0}")]
    Data(String),

    /// A non-finite value showed up where finite values are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png error on {path}: {message}")]
    Png { path: PathBuf, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 configuration, 3 data/format/io, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) => 2,
            Error::Format { .. }
            | Error::Data(_)
            | Error::Io { .. }
            | Error::Png { .. }
            | Error::Json(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}
