use thiserror::Error;

use crate::trace::Trace;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("unknown agent `{0}`")]
    UnknownAgent(String),

    #[error("unknown item `{0}`")]
    UnknownItem(String),

    #[error("instance too large for {what}: {detail}")]
    InstanceTooLarge { what: &'static str, detail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    /// A pricing scheme observed behaviour its construction rules out. The
    /// partial trace up to and including the offending step is attached.
    #[error("scheme failure at step {step}: {reason}")]
    SchemeFailure {
        step: usize,
        reason: String,
        trace: Box<Trace>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
