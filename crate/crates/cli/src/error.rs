use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed task, missing file, unsupported combination.
    #[error("{0}")]
    Input(String),
    /// A result failed its own consistency checks.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<treeverify::Error> for CliError {
    fn from(e: treeverify::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
