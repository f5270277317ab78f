use thiserror::Error;

/// Errors raised across the layout pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A document did not match the expected schema (missing field, wrong type).
    #[error("schema violation: {0}")]
    Schema(String),
    /// A value parsed but broke a domain invariant.
    #[error("invalid {what}: {reason}")]
    Invariant { what: &'static str, reason: String },
    /// A category or material name/id that is not in the active catalog.
    #[error("unknown {kind} '{name}'")]
    UnknownId { kind: &'static str, name: String },
    /// Caller passed arguments outside an operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The embedding provider failed (remote adapter unreachable, bad reply).
    #[error("embedding provider failure: {0}")]
    Provider(String),
    /// A scenario template could not be instantiated within the attempt cap.
    #[error("template '{template}' is unsatisfiable: {reason}")]
    Unsatisfiable { template: String, reason: String },
    /// Checkpoint does not match the active vocabulary.
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invariant(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invariant {
            what,
            reason: reason.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Schema(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(std::io::Error::other(err.to_string()))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
