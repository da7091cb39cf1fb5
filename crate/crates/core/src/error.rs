use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Requested simulation size exceeds the configured maximum.
    #[error("resource limit exceeded: requested {requested} points, maximum is {max}")]
    Resource { requested: u64, max: u64 },

    #[error("malformed box: {0}")]
    MalformedBox(String),

    /// Model parameters are valid individually but the requested object does not exist
    /// (for example an infinite limit).
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("environment error: {0}")]
    Environment(String),

    /// A box is smaller than the measure the truncation certificate was issued for.
    #[error("certificate violation: box measure {measure} is below certified minimum {m_min}")]
    CertificateViolation { measure: f64, m_min: f64 },

    #[error("bracketing failure: {0}")]
    Bracketing(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("empty sample")]
    EmptySample,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
