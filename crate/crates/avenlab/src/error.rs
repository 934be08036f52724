//! Crate-wide error type and the exit-code mapping used by the CLI.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An operation was given operands whose shapes do not fit together.
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    /// A configuration value is out of its documented range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Inputs were structurally valid but violate a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A text input (interval file, config file) could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A binary artifact (feature file, checkpoint) is malformed.
    #[error("format error in {}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Training or evaluation produced a non-finite value and was aborted.
    #[error("numerical abort: {0}")]
    Numerical(String),
}

impl Error {
    /// CLI exit status: 0 success, 1 validation/config, 2 i/o, 3 numerical abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            Error::Numerical(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }
}
