//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Schema construction or validation failure.
    #[error("schema error: {0}")]
    Schema(String),

    /// Prompt composition failure; carries the offending event type.
    #[error("composition error for event type `{event_type}`: {reason}")]
    Compose { event_type: String, reason: String },

    /// Broken parent link or inconsistent depth in a prompt lineage.
    #[error("lineage error: {0}")]
    Lineage(String),

    /// An edit named an event type absent from the schema.
    #[error("edit rejected: event type `{0}` is not declared in the schema")]
    UnknownEditType(String),

    /// Refused to serialize a schema-invalid instance.
    #[error("serialization refused: {0}")]
    Serialize(String),

    /// Meta-prompt template rendering failure.
    #[error("template error: {0}")]
    Template(String),

    /// Backend transport or protocol failure.
    #[error("backend error: {message}")]
    Backend { message: String, retryable: bool },

    /// Retries exhausted against a backend.
    #[error("backend retries exhausted: {0}")]
    RetryExhausted(String),

    /// The optimizer response had no usable instruction block.
    #[error("rewrite failure: {0}")]
    Rewrite(String),

    /// Bad run configuration or CLI usage.
    #[error("config error: {0}")]
    Config(String),

    /// Dataset loading or validation failure.
    #[error("data error: {0}")]
    Data(String),

    /// Prediction/gold length mismatch or invalid instances at scoring time.
    #[error("scoring error: {0}")]
    Scoring(String),

    /// Search engine failure (checkpointing, resume, rollout bookkeeping).
    #[error("search error: {0}")]
    Search(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether a retry against the backend may succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Backend { retryable: true, .. })
    }
}
