use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error{}: {msg}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    Numeric { step: Option<u64>, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric {
            step: None,
            msg: msg.into(),
        }
    }

    /// Attaches a training step index to a numeric error.
    pub fn at_step(self, t: u64) -> Self {
        match self {
            Error::Numeric { msg, .. } => Error::Numeric { step: Some(t), msg },
            other => other,
        }
    }
}
