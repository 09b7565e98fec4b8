//! Run directories, manifests and content-hash experiment ids.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    AbortedBlowup,
    LeakageFlag,
    InvariantViolation,
}

impl Outcome {
    /// The process exit code for this outcome.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Ok => 0,
            Outcome::AbortedBlowup => 3,
            Outcome::LeakageFlag | Outcome::InvariantViolation => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment_id: String,
    pub kind: String,
    pub config: std::collections::BTreeMap<String, String>,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub started_at: f64,
    pub finished_at: f64,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub files: Vec<String>,
}

/// First 16 hex digits of the SHA-256 of the canonical config.
pub fn experiment_id(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.canonical().as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Writes `files` into `root/id` through a sibling temp directory and a
/// rename, replacing any previous run with the same id.
pub fn write_run_dir(root: &Path, id: &str, files: &[(String, Vec<u8>)]) -> io::Result<PathBuf> {
    fs::create_dir_all(root)?;
    let stamp = format!("{}-{}", std::process::id(), SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0));
    let tmp = root.join(format!(".{id}.tmp-{stamp}"));
    fs::create_dir(&tmp)?;
    let result = (|| {
        for (name, bytes) in files {
            fs::write(tmp.join(name), bytes)?;
        }
        let dest = root.join(id);
        if dest.exists() {
            let old = root.join(format!(".{id}.old-{stamp}"));
            fs::rename(&dest, &old)?;
            fs::rename(&tmp, &dest)?;
            fs::remove_dir_all(&old)?;
        } else {
            fs::rename(&tmp, &dest)?;
        }
        Ok(dest)
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result
}

pub fn read_manifest(dir: &Path) -> io::Result<RunManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
