use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Zero diffusion scale (sigma * sqrt(tau) == 0) where a finite d± is required.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A market quote outside every attainable model price, including the static bounds.
    #[error("quote rejected: {0}")]
    QuoteRejected(String),

    /// Likelihood optimisation failed; carries the best point seen, if any.
    #[error("estimation failed: {message}")]
    Estimation {
        message: String,
        best: Option<Box<crate::volatility::GarchParams>>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("data quality: {0}")]
    DataQuality(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
