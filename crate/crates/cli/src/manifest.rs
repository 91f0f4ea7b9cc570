//! Run manifests: what produced a result directory and how to reproduce it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{io_err, CliError};

/// File name of the manifest inside every result directory.
pub const MANIFEST_FILE: &str = "manifest.json";

/// Manifest schema identifier and version, written into every manifest.
pub const MANIFEST_SCHEMA: &str = "fdcell-manifest";
pub const MANIFEST_VERSION: u32 = 1;

/// Record of one invocation, sufficient to regenerate every listed output
/// byte for byte: rerun the recorded command with the recorded seed and
/// sizes (for `run`, with a config file holding exactly `config_toml`).
/// Only `created_utc` varies between a run and its reproduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub version: u32,
    pub tool_version: String,
    /// Wall-clock creation time (RFC 3339); informational only.
    pub created_utc: String,
    pub command: CommandSpec,
    pub master_seed: u64,
    /// Fully resolved configuration in canonical TOML. For presets this is
    /// the base configuration the sweep varies.
    pub config_toml: String,
    pub outputs: Vec<OutputFile>,
}

/// The invocation that produced the directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommandSpec {
    /// `fdcell run` with the manifest's `config_toml`.
    Run,
    /// `fdcell preset <name> --seed <master_seed> --drops <drops> --slots <slots>`.
    Preset {
        name: String,
        drops: usize,
        slots: usize,
    },
}

/// One emitted artifact and the schema its consumer should expect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the directory holding the manifest.
    pub path: String,
    /// Versioned schema tag, e.g. `fdcell-gains-v1`.
    pub schema: String,
}

impl RunManifest {
    pub fn new(command: CommandSpec, master_seed: u64, config_toml: String) -> Self {
        RunManifest {
            schema: MANIFEST_SCHEMA.to_owned(),
            version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            created_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            command,
            master_seed,
            config_toml,
            outputs: Vec::new(),
        }
    }

    /// Writes the manifest as pretty JSON into `dir` and returns its path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|source| CliError::Json { what: MANIFEST_FILE, source })?;
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| CliError::Json { what: MANIFEST_FILE, source })
    }
}

// ============================================================================
// Tests
// ============================================================================
