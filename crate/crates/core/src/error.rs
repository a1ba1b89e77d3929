use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semi-definite (eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("response is constant; distance statistics are undefined")]
    DegenerateResponse,

    #[error("embedding is constant; distance correlation is undefined")]
    DegenerateEmbedding,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(String),
}

impl Error {
    /// Stable machine-readable code used by the CLI error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape(_) => "SHAPE",
            Error::NotSymmetric(_) => "NOT_SYMMETRIC",
            Error::NotPsd(_) => "NOT_PSD",
            Error::NonFinite(_) => "NON_FINITE",
            Error::InsufficientSamples { .. } => "INSUFFICIENT_SAMPLES",
            Error::DegenerateResponse => "DEGENERATE_RESPONSE",
            Error::DegenerateEmbedding => "DEGENERATE_EMBEDDING",
            Error::DegenerateInput(_) => "DEGENERATE_INPUT",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::Io { .. } => "IO",
            Error::Csv(_) => "CSV",
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
