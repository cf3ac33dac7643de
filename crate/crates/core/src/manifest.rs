//! Run manifests: what was run, with which resolved parameters, and the
//! SHA-256 of every file written.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{write_text, SCHEMA_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub schema_version: u32,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub code_version: String,
    pub outputs: Vec<OutputFile>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value, seed: u64) -> Self {
        RunManifest {
            schema: "run_manifest".into(),
            schema_version: SCHEMA_VERSION,
            subcommand: subcommand.into(),
            config,
            seed,
            code_version: env!("CARGO_PKG_VERSION").into(),
            outputs: Vec::new(),
        }
    }

    /// Writes `text` to `dir/name` and records its hash.
    pub fn write_output(&mut self, dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        let text = text.replace("\r\n", "\n");
        write_text(&path, &text)?;
        self.outputs.retain(|o| o.path != name);
        self.outputs.push(OutputFile {
            path: name.into(),
            sha256: sha256_hex(text.as_bytes()),
            bytes: text.len() as u64,
        });
        Ok(path)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        write_text(&path, &self.to_json()?)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: RunManifest = serde_json::from_str(&text)?;
        if m.schema != "run_manifest" {
            return Err(Error::Config(format!("{} is not a run manifest", path.display())));
        }
        Ok(m)
    }

    /// Outputs under `dir` whose content no longer matches the recorded hash.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for o in &self.outputs {
            match std::fs::read(dir.join(&o.path)) {
                Ok(b) if sha256_hex(&b) == o.sha256 => {}
                _ => bad.push(o.path.clone()),
            }
        }
        Ok(bad)
    }
}
