use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Run record written next to the CSVs: the config echo plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub seed: u64,
    pub version: String,
    pub git_rev: String,
    /// CSV files, relative to the manifest's directory.
    pub files: Vec<String>,
    /// Scheduler checkpoint file, for AutoDrop training runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
    pub config: toml::Table,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, files: Vec<String>, checkpoint: Option<String>) -> Self {
        Self {
            kind: cfg.kind().name().into(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            git_rev: git_rev(),
            files,
            checkpoint,
            config: cfg.to_table(),
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if text.trim().is_empty() {
            return Err(CliError::Config(format!("{} is empty", path.display())));
        }
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn experiment(&self) -> CliResult<ExperimentConfig> {
        ExperimentConfig::from_table(self.config.clone(), None)
    }
}

/// Short revision of the enclosing git checkout, or `unknown`.
pub fn git_rev() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "--short=12", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}
