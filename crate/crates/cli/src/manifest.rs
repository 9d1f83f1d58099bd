//! Run manifests: the resolved command plus checksums of inputs and artifacts.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;

pub const FORMAT: &str = "obliq-manifest v1";
pub const FILE_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path, name: impl Into<String>) -> std::io::Result<Self> {
        Ok(FileDigest {
            path: name.into(),
            sha256: sha256_file(path)?,
        })
    }
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: String,
    pub command: Command,
    /// Input files with their checksums at run time.
    pub inputs: Vec<FileDigest>,
    /// Output files relative to the output directory.
    pub artifacts: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(command: Command, inputs: Vec<FileDigest>, artifacts: Vec<FileDigest>) -> Self {
        Manifest {
            format: FORMAT.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            inputs,
            artifacts,
        }
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        if manifest.format != FORMAT {
            anyhow::bail!(obliq::Error::Format(format!(
                "unsupported manifest format {:?}",
                manifest.format
            )));
        }
        Ok(manifest)
    }
}
