use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor extents disagree with what an operation requires.
    #[error("shape error: {0}")]
    Shape(String),
    /// A zero extent or an element count that overflows `usize`.
    #[error("size error: {0}")]
    Size(String),
    /// Invalid layer, network or training configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Well-formed input whose content is out of range (labels, counts).
    #[error("data error: {0}")]
    Data(String),
    /// Malformed file contents.
    #[error("format error: {0}")]
    Format(String),
    /// Operation called in the wrong lifecycle state.
    #[error("state error: {0}")]
    State(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
