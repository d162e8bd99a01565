use thiserror::Error;

use crate::indices::IndexKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("theta = {theta} lies outside the parameter interval [{lo}, {hi}]")]
    Domain { theta: f64, lo: f64, hi: f64 },

    #[error("value {value} outside admissible range [{lo}, {hi}]: {what}")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} is singular at theta = {theta}")]
    Singular { what: &'static str, theta: f64 },

    #[error("{what} is ill-conditioned at theta = {theta} (condition number {cond:.3e})")]
    IllConditioned {
        what: &'static str,
        theta: f64,
        cond: f64,
    },

    #[error("{kind:?} indices are not constant: {reference:?} at theta = {reference_theta} but {found:?} at theta = {theta}")]
    NonConstantIndices {
        kind: IndexKind,
        reference_theta: f64,
        reference: Vec<usize>,
        theta: f64,
        found: Vec<usize>,
    },

    #[error("precondition violated: {message}")]
    Precondition { message: String, theta: Option<f64> },
}

impl Error {
    /// Parameter value that witnesses the failure, when there is one.
    pub fn witness(&self) -> Option<f64> {
        match self {
            Error::Domain { theta, .. }
            | Error::Singular { theta, .. }
            | Error::IllConditioned { theta, .. }
            | Error::NonConstantIndices { theta, .. } => Some(*theta),
            Error::Precondition { theta, .. } => *theta,
            _ => None,
        }
    }

    pub(crate) fn precondition(message: impl Into<String>, theta: Option<f64>) -> Self {
        Error::Precondition {
            message: message.into(),
            theta,
        }
    }
}
