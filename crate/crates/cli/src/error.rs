use thiserror::Error;
use wrs_core::WrsError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {source}")]
    Parse { line: u64, source: WrsError },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] WrsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
