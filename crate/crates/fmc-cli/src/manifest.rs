//! Run manifest written alongside every command's outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use fmc_core::config::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(
        command: &str,
        params: &ModelParams,
        seed: Option<u64>,
        outputs: Vec<String>,
        duration_secs: f64,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: params.to_key_values(),
            outputs,
            duration_secs,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Manifest path next to a primary output: `<output>.manifest.json` for
    /// files, `<dir>/run.manifest.json` for directories.
    pub fn path_for(primary: &Path, is_dir: bool) -> PathBuf {
        if is_dir {
            primary.join("run.manifest.json")
        } else {
            let mut name = primary.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            primary.with_file_name(name)
        }
    }

    pub fn write_alongside(&self, primary: &Path, is_dir: bool) -> std::io::Result<PathBuf> {
        let path = Self::path_for(primary, is_dir);
        std::fs::write(&path, self.to_json())?;
        Ok(path)
    }
}
