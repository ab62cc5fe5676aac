use thiserror::Error;

/// Errors raised while constructing or encoding a [`crate::MedicalMessage`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MessageError {
    #[error("field `{0}` must not be empty")]
    EmptyField(&'static str),
    #[error("field `{field}` contains reserved delimiter {delimiter:?}: {value:?}")]
    ReservedDelimiter {
        field: String,
        delimiter: char,
        value: String,
    },
    #[error("unknown message type {0:?}")]
    UnknownType(String),
}

/// Configuration errors. Each variant names the offending key so the CLI can
/// report it verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("n >= 3f + 1 violated: n = {n}, f = {f} requires n >= {required}")]
    QuorumBound { n: usize, f: usize, required: usize },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

/// Errors that abort a simulation run.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Message(#[from] MessageError),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("agent `{0}` cannot send to itself")]
    SelfSend(String),
    #[error("message id `{0}` proposed twice")]
    DuplicateMessageId(String),
    #[error("agent `{from}` has no link to `{to}`")]
    NotAPeer { from: String, to: String },
    #[error("simulation did not quiesce within {cap} events (clock at {clock_ms} ms)")]
    EventCap { cap: u64, clock_ms: u64 },
    #[error(
        "quorum safety violated for `{message_id}`: {honest_accepts} honest ACCEPT votes, \
         at least {required} required"
    )]
    QuorumSafety {
        message_id: String,
        honest_accepts: usize,
        required: usize,
    },
}
