use std::path::PathBuf;

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("network misuse: {0}")]
    Network(String),

    #[error("artifact format error: {0}")]
    Format(String),

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("unsupported artifact version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Machine-readable category used by the CLI for error reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::InvalidParameter(_) => "parameter",
            Error::Singular(_) => "numeric",
            Error::Network(_) => "network",
            Error::Format(_) | Error::Checksum(_) | Error::UnsupportedVersion { .. } => "format",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit code associated with [`Error::category`].
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            "format" => 4,
            "numeric" => 5,
            "parameter" | "dimension" => 6,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
