use thiserror::Error;

/// Errors produced by the library. The CLI maps each variant family to a
/// distinct exit code (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid vertex address `{path}`: {reason}")]
    Address { path: String, reason: String },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("invalid model specification: {0}")]
    ModelSpec(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("domain error at level {level}: {detail}")]
    Domain { level: u64, detail: String },

    #[error("no sign change on [{lo}, {hi}]: {detail}")]
    NoSignChange { lo: f64, hi: f64, detail: String },

    #[error("non-monotone probes: {0}")]
    NonMonotone(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    /// 2 = parameter/domain errors, 3 = unsupported model or rule,
    /// 4 = insufficient samples, 1 = I/O and serialization.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Address { .. }
            | Error::Parameter(_)
            | Error::ModelSpec(_)
            | Error::Domain { .. }
            | Error::NoSignChange { .. }
            | Error::NonMonotone(_) => 2,
            Error::Unsupported(_) => 3,
            Error::InsufficientSamples(_) => 4,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
