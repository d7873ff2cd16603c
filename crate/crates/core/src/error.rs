use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("index error: {0}")]
    Index(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("size overflow: {0}")]
    SizeOverflow(String),
}

impl Error {
    /// Stable machine-readable kind, used by the CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::NonFinite { .. } => "non-finite",
            Error::Index(_) => "index",
            Error::Parameter(_) => "parameter",
            Error::Degenerate(_) => "degenerate",
            Error::UndefinedCorrelation(_) => "undefined-correlation",
            Error::SizeOverflow(_) => "size-overflow",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
