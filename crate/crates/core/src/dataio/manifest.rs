use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{SplitFractions, ZScoreTransform};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Records what a prepared dataset was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub files: Vec<ManifestFile>,
    pub split_seed: u64,
    pub fractions: SplitFractions,
    pub transform: Option<ZScoreTransform>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

impl DatasetManifest {
    pub fn add_file(&mut self, role: impl Into<String>, path: &Path) -> Result<()> {
        self.files.push(ManifestFile {
            role: role.into(),
            path: path.to_path_buf(),
            sha256: file_sha256(path)?,
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
