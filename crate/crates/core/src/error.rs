use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} ns outside pulse window [0, {tau}] ns")]
    TimeOutOfRange { t: f64, tau: f64 },

    #[error("anticrossing not crossed: final sweep value {phi_f} mΦ0 does not pass the crossing at {location} mΦ0")]
    AnticrossingNotCrossed { phi_f: f64, location: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0} (only 2 and 3 levels are modelled)")]
    UnsupportedDimension(usize),

    #[error("integration failed at t = {t} ns: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("sweep cell (phi_f = {phi_f} mΦ0, tau = {tau} ns) failed: {source}")]
    CellFailure {
        phi_f: f64,
        tau: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Analysis(String),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("parse error at line {line}, column '{column}': {message}")]
    Parse {
        line: usize,
        column: String,
        message: String,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
