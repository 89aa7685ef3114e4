use std::path::Path;

/// Failure categories of the command-line tool, each with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("stage failure: {0}")]
    Stage(String),
    #[error("I/O error: {0}")]
    Io(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn stage(stage: &str, err: impl std::fmt::Display) -> Self {
        CliError::Stage(format!("{stage}: {err}"))
    }
}

impl From<beamsel_core::Error> for CliError {
    fn from(err: beamsel_core::Error) -> Self {
        match err {
            beamsel_core::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Stage(other.to_string()),
        }
    }
}
