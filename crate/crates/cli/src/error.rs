use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] trilinear_core::Error),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} validation check(s) failed")]
    Validation { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use trilinear_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Core(E::InvalidConfig(_) | E::InvalidTruncation(_) | E::InvalidArgument(_)) => 2,
            CliError::Core(_) => 3,
            CliError::Validation { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
