use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A computational guard refused the request (enumeration too large,
    /// unsupported model/condition pairing, and so on).
    #[error("refused: {0}")]
    Guard(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("event log: {0}")]
    EventLog(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
