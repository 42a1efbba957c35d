use crate::C64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the library. Validation problems and numerical problems are
/// kept apart so that front ends can map them to different exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("point {z} lies outside the domain: {reason}")]
    Domain { z: C64, reason: String },
    #[error("integration node too close to the pole at {z}")]
    Pole { z: C64 },
    #[error("eta vanishes at {z}; the B-transform is undefined there")]
    ZeroOfEta { z: C64 },
    #[error("Newton inversion failed at {z} after {iterations} steps (residual {residual:e}); shrink |z| below the inversion radius")]
    InversionRadius { z: C64, iterations: usize, residual: f64 },
    #[error("fixed-point iteration did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("branch failure at {z}: {reason}")]
    Branch { z: C64, reason: String },
    #[error("turning point of the left inverse near {z}")]
    TurningPoint { z: C64 },
    #[error("anchor bracket on the negative axis failed for z0 = {z0}")]
    Anchor { z0: f64 },
    #[error("root tracking failed at {at}: {reason}")]
    RootTracking { at: f64, reason: String },
    #[error("degenerate mean: {0}")]
    DegenerateMean(String),
    #[error("unsupported pair: {0}")]
    UnsupportedPair(String),
    #[error("not well defined: {0}")]
    NotWellDefined(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(z: C64, reason: impl Into<String>) -> Self {
        Error::Domain {
            z,
            reason: reason.into(),
        }
    }

    /// True for input problems (bad documents, parameters, or domains), false for
    /// failures of a numerical method on valid input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. } | Error::Parse(_) | Error::Domain { .. } | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
