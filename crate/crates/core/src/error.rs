use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation at `{field}`: {reason}")]
    Schema { field: String, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("neutral weight must be non-negative, got {0}")]
    NegativeWeight(f64),
    #[error("reweighting leaves no probability mass")]
    DegenerateReweight,
    #[error("persona does not match goal: {0}")]
    PersonaMismatch(String),
    #[error("user already ended the dialogue")]
    Terminated,
    #[error("no template covers action {0}")]
    UncoveredAction(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("emotion label index {0} is not in the label map")]
    UnmappedLabel(i64),
    #[error("inconsistent training example: {0}")]
    InconsistentLabel(String),
    #[error("non-finite gradient, update skipped")]
    NonFiniteGradient,
    #[error(transparent)]
    Sequence(#[from] crate::user_sim::SequenceError),
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
