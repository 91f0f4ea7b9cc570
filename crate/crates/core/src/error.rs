//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called with an argument outside its contract.
    #[error("invalid parameter `{name}`: {reason}")]
    Param { name: &'static str, reason: String },

    /// A configuration value is outside its allowed range. `key` names the
    /// offending config entry so the message is actionable on its own.
    #[error("config value `{key}` out of range: {reason}")]
    ConfigRange { key: String, reason: String },

    /// The configuration text could not be parsed (syntax or unknown key).
    #[error("config parse error: {0}")]
    ConfigParse(String),

    /// A referenced file could not be read.
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A rate staircase table violated the expected line format or ordering.
    #[error("rate table line {line}: {reason}")]
    RateTable { line: usize, reason: String },

    /// Rejection sampling during user placement failed to find a feasible
    /// point (geometry leaves too little admissible area).
    #[error("user placement failed: {0}")]
    Placement(String),

    /// The preset name given to the experiment runner is not known.
    #[error("unknown preset `{0}` (expected fig2, gains, or asymmetry)")]
    UnknownPreset(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Param {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn range(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigRange {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
