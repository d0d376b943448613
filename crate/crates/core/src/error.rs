use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape, kernel or network configuration that cannot be evaluated.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown section [{name}] at line {line}")]
    UnknownSection { name: String, line: usize },

    #[error("truncated weights: layer {layer} needs {expected} floats, {actual} remain")]
    TruncatedWeights {
        layer: usize,
        expected: usize,
        actual: usize,
    },

    #[error("weights stream has {0} trailing bytes")]
    TrailingBytes(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("image error: {0}")]
    Image(String),

    #[error("{}:{line}: {message}", file.display())]
    Annotation {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("missing annotation file {}", .0.display())]
    MissingAnnotation(PathBuf),

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by user input rather than by the engine itself.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::NonFiniteLoss { .. })
    }
}
