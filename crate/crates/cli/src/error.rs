use std::path::Path;

use boostbif_core::Error as CoreError;

/// CLI failure, each class with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid `{key}`: {msg}")]
    Validation { key: String, msg: String },
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub const EXIT_PARSE: i32 = 3;
    pub const EXIT_VALIDATION: i32 = 4;
    pub const EXIT_CONVERGENCE: i32 = 5;
    pub const EXIT_IO: i32 = 6;

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        CliError::Parse { line, msg: msg.into() }
    }

    pub fn validation(key: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Validation { key: key.into(), msg: msg.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => Self::EXIT_PARSE,
            CliError::Validation { .. } => Self::EXIT_VALIDATION,
            CliError::Convergence(_) => Self::EXIT_CONVERGENCE,
            CliError::Io { .. } => Self::EXIT_IO,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { name, reason } => CliError::validation(name, reason),
            CoreError::WrongScheme { .. } => CliError::validation("scheme", e.to_string()),
            CoreError::DutyOutOfRange(_) => CliError::validation("duty", e.to_string()),
            CoreError::Dimension { .. } => CliError::validation("x0", e.to_string()),
            CoreError::Io { path, source } => CliError::Io { path, source },
            other => CliError::Convergence(other.to_string()),
        }
    }
}
