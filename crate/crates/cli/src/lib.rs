//! Command-line front end for the fdcell simulator: config loading,
//! experiment presets, and CSV/JSON artifact emission.
//!
//! Everything here is plumbing around [`fdcell_core`]: the presets sweep the
//! simulator over the standard parameter grids and write plot-ready tables,
//! and every result directory carries a manifest from which the outputs can
//! be regenerated byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use fdcell_core::config::SimConfig;
use thiserror::Error;

pub mod commands;
pub mod manifest;

pub use commands::{run_preset, run_single, PresetOptions, RunOptions, PRESET_NAMES};
pub use manifest::{CommandSpec, OutputFile, RunManifest, MANIFEST_FILE};

// ============================================================================
// Errors
// ============================================================================

/// Anything the front end can fail on: core validation and simulation
/// errors pass through, file and serialization problems carry the path or
/// payload they concern.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fdcell_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("encoding {what}: {source}")]
    Json {
        what: &'static str,
        source: serde_json::Error,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_owned(), source }
}

// ============================================================================
// Config loading
// ============================================================================

/// Reads a TOML configuration file. Unset keys take the built-in defaults;
/// unknown keys and out-of-range values are rejected with the offending key
/// named. An empty file yields the full default configuration.
pub fn parse_config(path: &Path) -> Result<SimConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(SimConfig::from_toml_str(&text)?)
}

// ============================================================================
// Tests
// ============================================================================
