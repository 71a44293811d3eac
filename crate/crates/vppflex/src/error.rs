use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {table} at line {line}: {message}")]
    Parse {
        table: String,
        line: usize,
        message: String,
    },

    #[error("invalid network: {0}")]
    Network(String),

    #[error("invalid fleet: {0}")]
    Fleet(String),

    #[error("invalid sampling config: {0}")]
    Sampling(String),

    #[error("invalid request: {0}")]
    Request(String),

    #[error("invalid scenario config: {0}")]
    Config(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
