//! Error type shared across the pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or layer shapes do not conform.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A corpus-level precondition failed (empty corpus, duplicate ids, ...).
    #[error("corpus error: {0}")]
    Corpus(String),

    /// Training hit a non-finite loss or gradient.
    #[error("training diverged at iteration {iteration}: {message}")]
    Training { iteration: usize, message: String },

    /// A file did not match its expected on-disk format.
    #[error("format error: {0}")]
    Format(String),

    /// Requested sizes exceed what is available.
    #[error("size error: {0}")]
    Size(String),

    /// An index is out of range.
    #[error("index error: {0}")]
    Index(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
