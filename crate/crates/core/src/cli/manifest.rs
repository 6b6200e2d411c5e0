//! Run manifests: resolved configuration, input/output hashes, versions,
//! and timings, written next to every command's artifacts.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn hash_file(path: &Path) -> std::io::Result<String> {
    Ok(format!("fnv1a:{:016x}", fnv1a64(&std::fs::read(path)?)))
}

pub fn hash_text(text: &str) -> String {
    format!("fnv1a:{:016x}", fnv1a64(text.as_bytes()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub command: String,
    pub crate_version: String,
    /// Resolved configuration after merging flags, config file, defaults.
    pub config: serde_json::Value,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub wall_seconds: f64,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        let config_hash = hash_text(&config.to_string());
        Manifest {
            format_version: 1,
            command: command.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            config_hash,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            wall_seconds: 0.0,
        }
    }

    pub fn record_input(&mut self, path: &Path) -> std::io::Result<()> {
        self.inputs
            .insert(path.display().to_string(), hash_file(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("manifest json"))
    }
}
