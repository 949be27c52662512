//! Crate-wide error type.
//!
//! Every fallible public operation returns [`Result`]. Variants carry enough
//! context to name the offending entry (topology weight, config key, file)
//! without the caller re-deriving it.

use thiserror::Error;

/// Errors produced by construction, simulation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A problem, topology, schedule, or run parameter is out of its domain.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A mixing matrix failed a stochasticity or symmetry check.
    /// `entry` names the first offending position.
    #[error("invalid mixing matrix at {entry}: {reason}")]
    InvalidTopology { entry: String, reason: String },

    /// Iterates left the finite range during a run; carries the first bad step.
    #[error("divergence at round {round}, local step {step}: {what}")]
    Divergence { round: usize, step: usize, what: String },

    /// A bound was requested with constants that do not satisfy its premises
    /// and the caller asked for strict validation.
    #[error("bound premise violated: {0}")]
    BoundPremise(String),

    /// Config file could not be parsed or fails cross-field validation.
    #[error("config error: {0}")]
    Config(String),

    /// Requested combination is understood but unsupported (for example
    /// uniform-neighbor weights on an irregular graph).
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for the most common construction failure.
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
