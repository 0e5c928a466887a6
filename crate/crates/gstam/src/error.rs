//! Error type shared across the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor or graph shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Invalid configuration (bad kernel size, negative weight, unknown key, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A class label is out of range for its branch.
    #[error("label error: {0}")]
    Label(String),

    /// Unknown name in a registry lookup.
    #[error("unknown name: {0}")]
    Lookup(String),

    /// A graph operation was used outside its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed input file; carries the 1-based line number.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Evaluation could not be carried out (empty subset, no usable attributes, ...).
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// Training aborted on a non-finite loss.
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 i/o, 4 evaluation, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Lookup(_) | Error::Parse { .. } => 2,
            Error::Io { .. } => 3,
            Error::Evaluation(_) => 4,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
