use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thermoflux_core::Result;

use crate::output::Staged;

/// SHA-256 of the compact JSON form. `serde_json::Value` keeps object keys
/// sorted, so the hash does not depend on the key order of the input file.
pub fn config_hash(value: &serde_json::Value) -> String {
    let text = serde_json::to_string(value).expect("JSON values always serialise");
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub started_at: String,
    pub finished_at: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

pub struct Run {
    command: &'static str,
    started: DateTime<Utc>,
    inputs: Vec<PathBuf>,
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl Run {
    pub fn start(command: &'static str) -> Self {
        Self {
            command,
            started: Utc::now(),
            inputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Commits the staged outputs, then writes `<command>.manifest.json`
    /// listing them.
    pub fn finish(self, staged: Staged, config: &serde_json::Value) -> Result<Vec<PathBuf>> {
        let dir = staged.dir().to_path_buf();
        let outputs = staged.commit()?;
        let manifest = RunManifest {
            command: self.command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(config),
            started_at: stamp(self.started),
            finished_at: stamp(Utc::now()),
            inputs: self.inputs,
            outputs: outputs.clone(),
        };
        let mut m = Staged::new(&dir)?;
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        m.write_str(&format!("{}.manifest.json", self.command), &text)?;
        m.commit()?;
        Ok(outputs)
    }
}
