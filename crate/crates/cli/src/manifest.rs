//! Run manifests. Every output directory gets a `manifest.json` holding one
//! entry per subcommand that wrote into it; no timestamps, so a rerun with the
//! same flags rewrites the same bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub out: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detect_theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_lines: Option<usize>,
    pub seed: u64,
    /// Subcommand-specific settings.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
}

impl RunManifest {
    pub fn new(command: &str, out: &Path, seed: u64) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            corpus: None,
            input: None,
            out: out.display().to_string(),
            filter_theta: None,
            detect_theta: None,
            delta: None,
            min_lines: None,
            seed,
            params: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(key.to_string(), serde_json::to_value(value).expect("manifest params serialize"));
        self
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        Sha256::digest(&bytes).iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// Directory the subcommand writes into: `out` itself, or
    /// `out/run-<hash>` when `per_manifest` is set.
    pub fn run_dir(&self, per_manifest: bool) -> PathBuf {
        let out = PathBuf::from(&self.out);
        if per_manifest {
            out.join(format!("run-{}", self.hash()))
        } else {
            out
        }
    }

    /// Merge this entry into `dir/manifest.json`, replacing any earlier entry
    /// for the same subcommand.
    pub fn record(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut all: BTreeMap<String, RunManifest> = if path.exists() {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            BTreeMap::new()
        };
        all.insert(self.command.clone(), self.clone());
        let mut text = serde_json::to_string_pretty(&all)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_content() {
        let a = RunManifest::new("detect", Path::new("out"), 1);
        let b = a.clone().param("theta", 0.8);
        assert_eq!(a.hash(), RunManifest::new("detect", Path::new("out"), 1).hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 12);
        assert!(b.run_dir(true).ends_with(format!("run-{}", b.hash())));
        assert_eq!(b.run_dir(false), PathBuf::from("out"));
    }

    #[test]
    fn entries_merge_per_command() {
        let dir = tempfile::tempdir().unwrap();
        RunManifest::new("extract", dir.path(), 1).record(dir.path()).unwrap();
        RunManifest::new("detect", dir.path(), 1).record(dir.path()).unwrap();
        RunManifest::new("detect", dir.path(), 2).record(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let all: BTreeMap<String, RunManifest> = serde_json::from_str(&text).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all["detect"].seed, 2);
    }
}
