//! Error type shared by every stage of the pipeline.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FdaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FdaError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate row for date {date} and region '{region}' at line {line}")]
    DuplicateKey {
        line: usize,
        date: String,
        region: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown region '{0}'")]
    UnknownRegion(String),

    #[error("value t = {0} lies outside the domain [0, 1]")]
    Domain(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("underdetermined system: {rows} observations for {cols} unknowns")]
    Underdetermined { rows: usize, cols: usize },

    #[error("singular {context}: columns {columns:?} are numerically dependent")]
    Singular {
        context: String,
        columns: Vec<usize>,
    },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing artifact {}: run `{command}` first", path.display())]
    MissingArtifact { path: PathBuf, command: String },
}

impl FdaError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FdaError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the inputs or configuration rather than
    /// by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            FdaError::Parse { .. }
                | FdaError::DuplicateKey { .. }
                | FdaError::Validation(_)
                | FdaError::UnknownRegion(_)
                | FdaError::Config(_)
                | FdaError::Io { .. }
                | FdaError::Json(_)
                | FdaError::MissingArtifact { .. }
        )
    }
}
