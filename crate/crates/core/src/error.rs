use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, malformed or out of range.
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// A physical parameter is outside its valid domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// A mathematical precondition of an operation does not hold.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs disagree with the contract of the callee (wrong dimension,
    /// non-Hermitian generator, unnormalized state, wrong model kind).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The information matrix cannot be inverted.
    #[error("singular information matrix; unbounded estimation along {direction}")]
    Singular { direction: String },

    /// A probability model vanishes where the Fisher sum needs it.
    #[error("singular probability model: {0}")]
    SingularModel(String),

    /// Estimation could not produce a trustworthy answer.
    #[error("estimation failure: {0}")]
    Estimation(String),
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { key: key.into(), reason: reason.into() }
    }

    pub fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
