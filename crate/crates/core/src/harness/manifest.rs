//! Run directories and their manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run: the resolved configuration and the
/// hashes of what it wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// `<unix seconds>-<first 12 hex digits of the config hash>`.
    pub run_id: String,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub artifacts: Vec<Artifact>,
    pub version: String,
    pub created_unix: u64,
    pub duration_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Output root: `$BO_LAB_OUT`, else `./bo-lab-out`.
pub fn output_root() -> PathBuf {
    std::env::var_os("BO_LAB_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("bo-lab-out"))
}

/// An open run directory collecting artifacts.
pub struct RunDir {
    path: PathBuf,
    subcommand: String,
    config: serde_json::Value,
    config_sha256: String,
    run_id: String,
    created_unix: u64,
    started: SystemTime,
    artifacts: Vec<Artifact>,
}

impl RunDir {
    /// Creates `out`, or `<output root>/<subcommand>-<run id>` when `out` is
    /// `None`.
    pub fn create(subcommand: &str, config: &impl Serialize, out: Option<&Path>) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let canonical = serde_json::to_vec(&config)?;
        let config_sha256 = sha256_hex(&canonical);
        let started = SystemTime::now();
        let created_unix = started
            .duration_since(UNIX_EPOCH)
            .unwrap_or(Duration::ZERO)
            .as_secs();
        let run_id = format!("{created_unix}-{}", &config_sha256[..12]);
        let path = match out {
            Some(p) => p.to_path_buf(),
            None => output_root().join(format!("{subcommand}-{run_id}")),
        };
        fs::create_dir_all(&path).map_err(|e| {
            LabError::Config(format!(
                "cannot create output directory {}: {e}",
                path.display()
            ))
        })?;
        Ok(Self {
            path,
            subcommand: subcommand.into(),
            config,
            config_sha256,
            run_id,
            created_unix,
            started,
            artifacts: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let bytes = bytes.as_ref();
        fs::write(self.path.join(name), bytes)?;
        self.artifacts.retain(|a| a.name != name);
        self.artifacts.push(Artifact {
            name: name.into(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish(self) -> Result<RunManifest> {
        let manifest = RunManifest {
            run_id: self.run_id,
            subcommand: self.subcommand,
            config: self.config,
            config_sha256: self.config_sha256,
            artifacts: self.artifacts,
            version: env!("CARGO_PKG_VERSION").into(),
            created_unix: self.created_unix,
            duration_seconds: self
                .started
                .elapsed()
                .unwrap_or(Duration::ZERO)
                .as_secs_f64(),
        };
        fs::write(
            self.path.join(MANIFEST),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        Ok(manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)
        .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
}

/// Names of artifacts whose bytes no longer match the manifest.
pub fn stale_artifacts(dir: &Path, manifest: &RunManifest) -> Vec<String> {
    manifest
        .artifacts
        .iter()
        .filter(|a| {
            fs::read(dir.join(&a.name))
                .map(|b| sha256_hex(&b) != a.sha256)
                .unwrap_or(true)
        })
        .map(|a| a.name.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_hashed_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("run");
        let mut run =
            RunDir::create("verify", &serde_json::json!({"seed": 1}), Some(&out)).unwrap();
        run.write("a.txt", "hello").unwrap();
        let m = run.finish().unwrap();
        assert_eq!(m.artifacts.len(), 1);
        assert_eq!(
            m.artifacts[0].sha256,
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
        let back = read_manifest(&out).unwrap();
        assert_eq!(back, m);
        assert!(stale_artifacts(&out, &back).is_empty());
        fs::write(out.join("a.txt"), "changed").unwrap();
        assert_eq!(stale_artifacts(&out, &back), vec!["a.txt".to_string()]);
    }
}
