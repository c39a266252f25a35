use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

/// Provenance written next to every output file as `<file>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub seeds: Vec<u64>,
    pub version: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_time_seconds: f64,
}

pub struct Recorder {
    command: String,
    started: Instant,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            started: Instant::now(),
            seeds: Vec::new(),
            inputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Write a manifest beside each output file.
    pub fn finish(&self, outputs: &[&Path]) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.clone(),
            args: std::env::args().skip(1).collect(),
            seeds: self.seeds.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        for out in outputs {
            let mut name = out.as_os_str().to_owned();
            name.push(".manifest.json");
            std::fs::write(&name, &text).with_context(|| format!("writing {}", PathBuf::from(&name).display()))?;
        }
        Ok(())
    }
}
