use thiserror::Error;

/// Failures that are the caller's fault (bad parameters, malformed input).
///
/// Empirical refusals (a covering that did not certify, a chain that stalled)
/// are reported through [`Refusal`] instead, so callers can tell the two apart.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("unknown map family `{0}`")]
    UnknownFamily(String),
    #[error("inadmissible parameter: {0}")]
    Inadmissible(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// An expected negative outcome of a numerical procedure at the given resolution.
#[derive(Debug, Error, Clone, PartialEq, serde::Serialize)]
#[error("{reason}: {detail}")]
pub struct Refusal {
    pub reason: String,
    pub detail: String,
}

impl Refusal {
    pub fn new(reason: &str, detail: impl Into<String>) -> Self {
        Refusal {
            reason: reason.to_string(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("refused: {0}")]
    Refused(#[from] Refusal),
}

impl Error {
    pub fn refused(reason: &str, detail: impl Into<String>) -> Self {
        Error::Refused(Refusal::new(reason, detail))
    }

    pub fn invalid(detail: impl Into<String>) -> Self {
        Error::Param(ParamError::Invalid(detail.into()))
    }

    pub fn reason(&self) -> Option<&str> {
        match self {
            Error::Refused(r) => Some(&r.reason),
            Error::Param(_) => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
