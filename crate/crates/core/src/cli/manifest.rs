use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to re-run one command: no timestamps, no absolute
/// output paths, so identical runs produce identical manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Output directory that records what gets written into it.
pub(crate) struct OutDir {
    root: PathBuf,
    outputs: Vec<FileRecord>,
    inputs: Vec<FileRecord>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|source| CliError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            outputs: Vec::new(),
            inputs: Vec::new(),
        })
    }

    /// Path for `name` (relative, `/`-separated); parent dirs are created.
    pub fn path(&self, name: &str) -> Result<PathBuf> {
        let p = self.root.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        Ok(p)
    }

    /// Hashes an artifact that has just been written.
    pub fn record(&mut self, name: &str) -> Result<()> {
        let sha256 = sha256_file(&self.root.join(name))?;
        self.outputs.push(FileRecord {
            path: name.to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(FileRecord {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name)?;
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        text.push('\n');
        fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
        self.record(name)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name)?;
        fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
        self.record(name)
    }

    /// Writes `manifest.json` and returns it.
    pub fn finish(self, command: &str, seed: u64, parameters: serde_json::Value) -> Result<Manifest> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            parameters,
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let path = self.root.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Config {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        text.push('\n');
        fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
        Ok(manifest)
    }
}
