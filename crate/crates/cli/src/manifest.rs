//! Output directory with atomic writes and the run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Full config text as written by `Config::to_text`.
    pub config: String,
    /// sha256 of every input file, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of every output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
    pub wall_time_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::io(path, e))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Failure::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Failure::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Failure::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Failure::io(path, e.error))?;
    Ok(())
}

/// Collects outputs of one command and finishes with the manifest.
pub struct OutputDir {
    dir: PathBuf,
    started: Instant,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), started: Instant::now(), inputs: BTreeMap::new(), outputs: BTreeMap::new() })
    }

    /// Reads an input file and records its checksum.
    pub fn input(&mut self, path: &Path) -> Result<Vec<u8>, Failure> {
        let bytes = read_input(path)?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Renders through a core CSV writer.
    pub fn write_with(
        &mut self,
        name: &str,
        render: impl FnOnce(&mut Vec<u8>) -> polyshrink::Result<()>,
    ) -> Result<(), Failure> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::numerical(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, command: &str, seed: u64, config: String) -> Result<RunManifest, Failure> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
            inputs: self.inputs,
            outputs: self.outputs,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::numerical(e.to_string()))?;
        text.push('\n');
        write_atomic(&self.dir.join("manifest.json"), text.as_bytes())?;
        Ok(manifest)
    }
}
