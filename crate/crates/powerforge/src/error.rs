use std::io;

use powerforge_core::Error as CoreError;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("malformed session document: {0}")]
    Document(String),
    #[error("cannot read {path}: {source}")]
    Input { path: String, source: io::Error },
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AppError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            AppError::Core(e) => e.code(),
            AppError::Document(_) => "malformed_document",
            AppError::Input { .. } => "unreadable_input",
            AppError::UnknownSession(_) => "unknown_session",
            AppError::Io(_) => "io_error",
            AppError::Csv(_) => "csv_error",
            AppError::Json(_) => "json_error",
        }
    }

    /// Bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        match self {
            AppError::Core(e) => e.is_validation(),
            AppError::Document(_) | AppError::Input { .. } | AppError::UnknownSession(_) => true,
            AppError::Io(_) | AppError::Csv(_) | AppError::Json(_) => false,
        }
    }

    /// One-line JSON rendering for standard error and HTTP bodies.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": self.code(), "message": self.to_string() })
    }
}
