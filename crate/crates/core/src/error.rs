use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the detection pipeline.
///
/// Variants map onto the failure classes the CLI reports as distinct exit
/// codes, so new variants should pick the closest existing class.
#[derive(Debug, Error)]
pub enum Error {
    /// A referenced input could not be opened or read.
    #[error("cannot read {path}: {source}")]
    Ingestion {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Input bytes are present but malformed.
    #[error("format error: {0}")]
    Format(String),
    /// An argument or tunable is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A configuration key has an invalid value.
    #[error("invalid config value for `{key}`: {message}")]
    Config { key: String, message: String },
    /// Not enough (or degenerate) training data.
    #[error("training error: {0}")]
    Training(String),
    /// A stage was queried before its inputs were produced.
    #[error("sequencing error: {0}")]
    Sequencing(String),
    /// Scores or labels cannot be evaluated.
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
