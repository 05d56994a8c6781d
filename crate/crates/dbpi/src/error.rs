use dbpi_core::ErrorClass;
use std::path::PathBuf;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dbpi_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: row {row}: {message}", path.display())]
    Row { path: PathBuf, row: usize, message: String },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("configuration: {0}")]
    Config(String),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Format { path: path.into(), message: message.to_string() }
    }

    pub(crate) fn row(path: impl Into<PathBuf>, row: usize, message: impl ToString) -> Self {
        CliError::Row { path: path.into(), row, message: message.to_string() }
    }

    /// 2 configuration, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Numerical => 4,
            },
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Row { .. } | CliError::Format { .. } => 3,
        }
    }
}
