use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible shapes. `node` is the offending graph node when the
    /// error came out of a computation graph.
    #[error("dimension error{}: {msg}", node_suffix(*.node))]
    Dimension { node: Option<usize>, msg: String },

    #[error("numeric error at node {node} ({op}): non-finite value")]
    Numeric { node: usize, op: &'static str },

    #[error("state error: {0}")]
    State(String),

    #[error("index error: {what} {index} out of range (< {bound})")]
    Index {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Training produced a non-finite loss.
    #[error("non-finite loss in epoch {epoch}, batch {batch}, step {step}")]
    Diverged { epoch: usize, batch: usize, step: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn node_suffix(node: Option<usize>) -> String {
    match node {
        Some(id) => format!(" at node {id}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension {
            node: None,
            msg: msg.into(),
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from bad input (usage, parse or validation)
    /// as opposed to a runtime or numeric failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::Parse { .. }
                | Error::Index { .. }
                | Error::Dimension { .. }
                | Error::UndefinedMetric(_)
        )
    }
}
