use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] homog_core::Error),
    #[error("line {line}: {message}")]
    ConfigLine { line: usize, message: String },
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad field file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{failed} of {total} samples failed (limit 1%): first failure at sample {first}: {reason}")]
    FailureRate { failed: usize, total: usize, first: u64, reason: String },
    #[error("analysis: {0}")]
    Analysis(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    /// Configuration problems map to exit code 2.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            LabError::ConfigLine { .. }
                | LabError::Config(_)
                | LabError::Core(homog_core::Error::Config(_))
                | LabError::Core(homog_core::Error::Unsupported(_))
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
