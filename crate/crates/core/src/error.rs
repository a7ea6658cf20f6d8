use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty mask")]
    EmptyMask,
    #[error("behind camera (z = {0})")]
    BehindCamera(f64),
    #[error("length mismatch: {what} expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("diverged: {0}")]
    Diverged(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("schema violation at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("frame {frame}: {message}")]
    Frame { frame: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
