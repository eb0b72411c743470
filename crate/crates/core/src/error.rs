use std::path::PathBuf;

use crate::table::RowId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{}:{line}: parse error: {msg}", file.display())]
    Parse { file: PathBuf, line: usize, msg: String },

    #[error("{}:{line}: validation error: {msg}", file.display())]
    Validation { file: PathBuf, line: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("archive {}: {msg}", path.display())]
    Archive { path: PathBuf, msg: String },

    #[error("out of memory materializing partition {partition} ({rows} rows)")]
    Resource { partition: usize, rows: usize },

    #[error("row {row}: {source}")]
    Row {
        row: RowId,
        #[source]
        source: Box<Error>,
    },

    #[error("shape mismatch: expected width {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("numeric error at epoch {epoch}: {msg}")]
    Numeric { epoch: usize, msg: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
