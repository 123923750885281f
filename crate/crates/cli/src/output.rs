//! Output files with checksums, and the per-command manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, Loaded};
use crate::error::CliError;

/// Collects `relative path → sha256` for every file a command writes.
pub struct Outputs {
    root: PathBuf,
    files: Mutex<BTreeMap<String, String>>,
}

impl Outputs {
    pub fn new(root: &Path) -> Self {
        Outputs { root: root.to_path_buf(), files: Mutex::new(BTreeMap::new()) }
    }

    /// Removes a previous run's directory so reruns leave no stale files.
    pub fn reset_dir(&self, rel: &str) -> Result<(), CliError> {
        let dir = self.root.join(rel);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))
    }

    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.lock().unwrap().insert(rel.to_string(), hex(&Sha256::digest(bytes)));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    /// Writes `manifests/<command>.json`. Contains no timestamps or thread
    /// counts, so identical runs produce identical manifests.
    pub fn finish(self, command: &str, loaded: &Loaded, summary: serde_json::Value) -> Result<(), CliError> {
        let files = self.files.into_inner().unwrap();
        let manifest = Manifest {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            config_hash: loaded.config_hash(),
            master_seed: loaded.config.master_seed,
            outputs: files,
            summary,
        };
        let rel = format!("manifests/{command}.json");
        let path = self.root.join(&rel);
        std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| CliError::io(&path, e))?;
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializable");
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    config_hash: String,
    master_seed: u64,
    outputs: BTreeMap<String, String>,
    summary: serde_json::Value,
}
