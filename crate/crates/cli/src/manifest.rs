use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance record written next to every produced file. Two runs with the
/// same manifest produce identical outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub options: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, InputDigest>,
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl RunManifest {
    pub fn new(command: &str) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: None,
            strategy: None,
            seed: None,
            options: BTreeMap::new(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn option(&mut self, key: &str, value: impl ToString) {
        self.options.insert(key.to_string(), value.to_string());
    }

    pub fn input(&mut self, role: &str, path: &Path) -> anyhow::Result<()> {
        let bytes = fs::read(path)
            .map_err(|e| anyhow::anyhow!("digesting input {} ({}): {e}", role, path.display()))?;
        let digest = Sha256::digest(&bytes);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.insert(
            role.to_string(),
            InputDigest {
                path: path.display().to_string(),
                sha256,
            },
        );
        Ok(())
    }

    /// Writes `<output>.manifest.json` next to the produced file.
    pub fn write_beside(&self, output: &Path) -> anyhow::Result<PathBuf> {
        let path = PathBuf::from(format!("{}.manifest.json", output.display()));
        let mut body = serde_json::to_string_pretty(self)?;
        body.push('\n');
        fs::write(&path, body)
            .map_err(|e| anyhow::anyhow!("writing manifest {}: {e}", path.display()))?;
        Ok(path)
    }
}
