use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("command `{0}` is randomized and needs an explicit --seed")]
    MissingSeed(&'static str),

    #[error("input not found: {}", .0.display())]
    InputNotFound(PathBuf),

    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{}:{line}:{column}: non-finite value `{token}`", path.display())]
    NonFiniteInput {
        path: PathBuf,
        line: usize,
        column: usize,
        token: String,
    },

    #[error("invalid matrix: {0}")]
    Validation(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] mvtreelet::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            CliError::InputNotFound(path)
        } else {
            CliError::Io { path, source }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::MissingSeed(_) => "missing-seed",
            CliError::InputNotFound(_) => "input-not-found",
            CliError::Parse { .. } => "parse",
            CliError::NonFiniteInput { .. } => "non-finite-input",
            CliError::Validation(_) => "validation",
            CliError::Io { .. } => "io",
            CliError::Core(e) => e.kind(),
        }
    }

    /// Process exit status; one value per error kind.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" => 2,
            "missing-seed" => 3,
            "input-not-found" => 4,
            "parse" => 5,
            "non-finite-input" => 6,
            "validation" => 7,
            "io" => 8,
            "dimension" => 10,
            "non-finite" => 11,
            "index" => 12,
            "parameter" => 13,
            "degenerate" => 14,
            "undefined-correlation" => 15,
            "size-overflow" => 16,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
