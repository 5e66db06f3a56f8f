use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// What a command ran with and what it wrote. Together with the config
/// hash it fully determines the outputs; it holds no timestamps so reruns
/// are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    /// Seeds by role (dataset, split, init, per-distance, ...).
    pub seeds: BTreeMap<String, u64>,
    /// The section the command ran with, after overrides.
    pub effective: serde_json::Value,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config_text: &str, effective: &impl Serialize) -> Result<Self> {
        Ok(Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
            seeds: BTreeMap::new(),
            effective: serde_json::to_value(effective).map_err(|e| Error::Format(e.to_string()))?,
            outputs: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn seed(&mut self, role: impl Into<String>, seed: u64) {
        self.seeds.insert(role.into(), seed);
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::file(path, e))
    }
}
