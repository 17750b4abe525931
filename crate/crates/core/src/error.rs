use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("hypnogram misaligned: {0}")]
    Alignment(String),

    #[error("unsupported rate: {0}")]
    UnsupportedRate(String),

    #[error("signal too short: need {needed} samples, have {actual}")]
    SignalTooShort { needed: usize, actual: usize },

    #[error("insufficient channels: need {needed}, have {actual}")]
    InsufficientChannels { needed: usize, actual: usize },

    #[error("region of interest {0} has no channels")]
    EmptyRoi(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("phase bin {bin} received no samples")]
    InsufficientCoverage { bin: usize },

    #[error("empty feature selection")]
    EmptySelection,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
