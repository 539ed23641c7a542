use std::path::PathBuf;

use confope_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("acceptance failures: {0}")]
    Acceptance(String),
}

pub type AppResult<T> = std::result::Result<T, AppError>;

impl AppError {
    pub fn config(msg: impl Into<String>) -> Self {
        AppError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 configuration or input error, 3 infeasible uncertainty set,
    /// 4 unvisited cells, 5 acceptance failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(CoreError::Infeasible { .. }) => 3,
            AppError::Core(CoreError::Unvisited { .. }) => 4,
            AppError::Acceptance(_) => 5,
            _ => 2,
        }
    }
}
