//! Artifact plumbing: staged output directories with atomic publication,
//! config hashing, and manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Hash identifying a run configuration (first 16 hex chars of SHA-256 over
/// the canonical JSON encoding).
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    hex[..16].to_string()
}

/// Staging directory: artifacts are written under a temporary sibling of the
/// target and renamed into place only when complete, so partially written
/// runs never appear at the published path.
pub struct StagedDir {
    target: PathBuf,
    tmp: PathBuf,
}

impl StagedDir {
    pub fn create(target: &Path) -> Result<Self, CliError> {
        let file_name = target
            .file_name()
            .ok_or_else(|| CliError::Config(format!("invalid output path {}", target.display())))?;
        let tmp = target.with_file_name(format!(".{}.partial", file_name.to_string_lossy()));
        if tmp.exists() {
            std::fs::remove_dir_all(&tmp).map_err(|e| CliError::Run(e.into()))?;
        }
        std::fs::create_dir_all(&tmp).map_err(|e| CliError::Run(e.into()))?;
        Ok(StagedDir {
            target: target.to_path_buf(),
            tmp,
        })
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let data = serde_json::to_vec_pretty(value).map_err(|e| CliError::Run(e.into()))?;
        std::fs::write(self.tmp.join(name), data).map_err(|e| CliError::Run(e.into()))?;
        Ok(())
    }

    pub fn write_bytes(&self, name: &str, data: &[u8]) -> Result<(), CliError> {
        std::fs::write(self.tmp.join(name), data).map_err(|e| CliError::Run(e.into()))?;
        Ok(())
    }

    /// Publishes the staged directory at the target path, replacing any
    /// previous run output.
    pub fn publish(self) -> Result<PathBuf, CliError> {
        if self.target.exists() {
            std::fs::remove_dir_all(&self.target).map_err(|e| CliError::Run(e.into()))?;
        }
        if let Some(parent) = self.target.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| CliError::Run(e.into()))?;
            }
        }
        std::fs::rename(&self.tmp, &self.target).map_err(|e| CliError::Run(e.into()))?;
        Ok(self.target)
    }
}

/// Standard manifest written next to every artifact set.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub config: &'a T,
    pub seeds: &'a [u64],
}

impl<'a, T: Serialize> Manifest<'a, T> {
    pub fn new(config: &'a T, seeds: &'a [u64]) -> Self {
        Manifest {
            tool: "psrlab",
            version: env!("CARGO_PKG_VERSION"),
            config_hash: config_hash(config),
            config,
            seeds,
        }
    }
}
