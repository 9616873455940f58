//! Command failures and their process exit codes.

use std::fmt;
use std::path::Path;

use crossel_core::Error;

/// Stable process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    /// Bad flags, unreadable or malformed input.
    Usage = 2,
    /// A numeric stage failed.
    Numeric = 3,
    /// The constraining region contained no grid node.
    EmptyRegion = 4,
    /// The environment refused: unwritable output, port in use.
    Environment = 5,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            status: ExitStatus::Usage,
            message: message.into(),
        }
    }

    pub fn environment(message: impl Into<String>) -> Self {
        CliError {
            status: ExitStatus::Environment,
            message: message.into(),
        }
    }

    /// Failure to write an output file.
    pub fn write(path: &Path, err: impl fmt::Display) -> Self {
        Self::environment(format!("cannot write {}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Exit status for an engine error.
pub fn status_of(err: &Error) -> ExitStatus {
    match err {
        Error::Numeric(_) | Error::Degenerate(_) | Error::Packing(_) => ExitStatus::Numeric,
        Error::EmptyRegion => ExitStatus::EmptyRegion,
        _ => ExitStatus::Usage,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError {
            status: status_of(&err),
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
