use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::Command;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Complete,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub status: Status,
    pub threads: Option<usize>,
    pub run: Command,
    #[serde(default)]
    pub outputs: serde_json::Value,
}

impl Manifest {
    pub fn new(command: Command, threads: Option<usize>) -> Self {
        Manifest {
            tool: "dgt".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            status: Status::Running,
            threads,
            run: command,
            outputs: serde_json::Value::Null,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    /// Record the run's outputs and mark it complete.
    pub fn finish(mut self, outputs: impl Serialize, path: &Path) -> Result<()> {
        self.outputs = serde_json::to_value(outputs)?;
        self.status = Status::Complete;
        self.write(path)
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| crate::usage(format!("{}: not a dgt manifest: {e}", path.display())))
    }
}

/// Manifest location for a run writing into directory `dir`.
pub fn for_dir(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}

/// Manifest location for a run writing the single file `file`.
pub fn for_file(file: &Path) -> PathBuf {
    let mut s = OsString::from(file.as_os_str());
    s.push(".manifest.json");
    PathBuf::from(s)
}
