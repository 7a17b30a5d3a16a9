use std::fs;
use std::path::{Path, PathBuf};

use hanforge::{HanError, Result};
use serde::Serialize;

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Written next to every command's outputs: enough to rerun it exactly.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub argv: Vec<String>,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epoch_seconds: Option<Vec<f64>>,
}

impl RunManifest {
    pub fn new(command: &'static str, argv: Vec<String>, config: &RunConfig) -> Self {
        RunManifest {
            tool: "hanforge",
            version: env!("CARGO_PKG_VERSION"),
            command,
            argv,
            seed: config.seed(),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            epoch_seconds: None,
        }
    }

    pub fn write(&mut self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        self.outputs.push(path.clone());
        write_json(&path, self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| HanError::Format(e.to_string()))?;
    write_text(path, &(json + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HanError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
