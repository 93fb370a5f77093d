use thiserror::Error;

use crate::model::ControlKind;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input: bad CSV layout, wrong sample scheme, bad arguments.
    Schema,
    /// A parameter outside its admissible domain.
    Domain,
    /// The data or the parameters leave the estimator undefined.
    Numerical,
    /// File system failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("{family} control: migration estimate {value} lies outside the range of mu(theta)")]
    Boundary { family: ControlKind, value: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("inconsistent sample at generation {generation}: {reason}")]
    InconsistentSample { generation: usize, reason: String },

    #[error("degenerate parameters: {0}")]
    DegenerateParameter(String),

    #[error("all {} starts failed (first: {})", .failures.len(), .failures.first().map(|f| f.1.as_str()).unwrap_or("none"))]
    AllStartsFailed { failures: Vec<(usize, String)> },

    #[error("sample scheme mismatch: expected {expected}, found {found}")]
    Scheme { expected: String, found: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Domain(_) | Error::Boundary { .. } => ErrorClass::Domain,
            Error::DegenerateSample(_)
            | Error::DegenerateParameter(_)
            | Error::AllStartsFailed { .. } => ErrorClass::Numerical,
            Error::InconsistentSample { .. } | Error::Scheme { .. } | Error::Format(_) => {
                ErrorClass::Schema
            }
            Error::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(_) => ErrorClass::Io,
                _ => ErrorClass::Schema,
            },
            Error::Io(_) => ErrorClass::Io,
        }
    }

    pub(crate) fn inconsistent(generation: usize, reason: impl Into<String>) -> Self {
        Error::InconsistentSample {
            generation,
            reason: reason.into(),
        }
    }
}
