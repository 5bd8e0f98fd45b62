use thiserror::Error;

/// Errors surfaced by the experiment runner, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing dependency: {0}")]
    Dependency(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] hiresnn_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type AppResult<T> = std::result::Result<T, AppError>;

impl AppError {
    /// 2 config, 3 dependency, 4 data format, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use hiresnn_core::Error as E;
        match self {
            AppError::Config(_) | AppError::Core(E::Config(_)) => 2,
            AppError::Dependency(_) => 3,
            AppError::Format(_) | AppError::Core(E::Input(_)) => 4,
            _ => 1,
        }
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Format(e.to_string())
    }
}

pub(crate) fn format_err(offset: usize, msg: impl std::fmt::Display) -> AppError {
    AppError::Format(format!("byte offset {}: {}", offset, msg))
}
