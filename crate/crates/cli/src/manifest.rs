//! Per-artifact provenance: `<artifact>.manifest.json` next to each primary
//! output records the parameters, input and output digests and wall time.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub flashdex_version: String,
    pub params: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_ms: f64,
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let hash = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in hash.iter() {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(FileDigest { path: path.display().to_string(), sha256: hex, bytes: bytes.len() as u64 })
}

pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

impl Manifest {
    pub fn new(
        command: &str,
        params: serde_json::Value,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
        wall_ms: f64,
    ) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            flashdex_version: env!("CARGO_PKG_VERSION").to_string(),
            params,
            inputs: inputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            outputs: outputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            wall_ms,
        })
    }

    /// Writes the manifest next to the first output and returns its path.
    pub fn write(&self, primary: &Path) -> Result<PathBuf> {
        let path = manifest_path(primary);
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        std::fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        std::fs::write(&p, b"abc").unwrap();
        let d = digest(&p).unwrap();
        assert_eq!(d.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(d.bytes, 3);
    }

    #[test]
    fn manifest_sits_next_to_artifact() {
        assert_eq!(manifest_path(Path::new("out/c.store")), Path::new("out/c.store.manifest.json"));
    }
}
