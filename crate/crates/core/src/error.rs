use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient clean pool: requested {requested}, available {available} (short by {})", requested - available)]
    Capacity { requested: usize, available: usize },

    #[error("shape mismatch in {op}: {msg}")]
    Shape { op: &'static str, msg: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("degenerate stratum: {0}")]
    DegenerateStratum(String),

    #[error("training diverged in split {split} at epoch {epoch}: {msg}")]
    Training { split: usize, epoch: usize, msg: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Shape { op, msg: msg.into() }
    }
}
