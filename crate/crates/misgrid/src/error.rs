use thiserror::Error;

/// Failures while reading input files.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] misgrid_core::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Anything a command can fail with, mapped to a process exit code.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Core(misgrid_core::Error),
    #[error("{0}")]
    Diagnostic(String),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl From<misgrid_core::Error> for AppError {
    fn from(e: misgrid_core::Error) -> Self {
        match e {
            misgrid_core::Error::Invalid(m) => AppError::Usage(m),
            other => AppError::Core(other),
        }
    }
}

impl AppError {
    /// 1 usage, 2 input, 3 infeasible or diagnostic.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Ingest(_) | AppError::Csv(_) | AppError::Io(_) => 2,
            AppError::Core(_) | AppError::Diagnostic(_) => 3,
        }
    }
}
