use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    Ok(hash_bytes(&fs::read(path)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Record of one command invocation. Output paths are relative to the
/// command directory; the manifest does not list itself.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: String,
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub overrides: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    /// Set when the command failed after writing some outputs.
    pub partial: bool,
    pub warnings: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Collects inputs and outputs while a command runs.
pub struct Recorder {
    pub dir: PathBuf,
    manifest: RunManifest,
    inputs: BTreeMap<String, String>,
}

impl Recorder {
    pub fn new(
        dir: PathBuf,
        command: &str,
        config: &crate::config::Loaded,
        seed: u64,
        workers: usize,
        overrides: serde_json::Value,
    ) -> Result<Self, CliError> {
        fs::create_dir_all(&dir)?;
        let manifest = RunManifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config: config.path.display().to_string(),
            config_sha256: hash_bytes(config.text.as_bytes()),
            seed,
            workers,
            overrides,
            inputs: Vec::new(),
            outputs: Vec::new(),
            partial: false,
            warnings: Vec::new(),
            started_unix: now(),
            finished_unix: 0,
        };
        Ok(Self { dir, manifest, inputs: BTreeMap::new() })
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        if !path.exists() {
            return Err(CliError::config(format!("missing input {}", path.display())));
        }
        self.inputs.insert(path.display().to_string(), hash_file(path)?);
        Ok(())
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        let m = message.into();
        log::warn!("{m}");
        self.manifest.warnings.push(m);
    }

    pub fn warnings(&self) -> &[String] {
        &self.manifest.warnings
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes an output file relative to the command directory.
    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&p, contents)?;
        Ok(p)
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s)
    }

    /// Hashes everything under the command directory and writes the
    /// manifest.
    pub fn finish(mut self, partial: bool) -> Result<RunManifest, CliError> {
        let mut files = Vec::new();
        collect(&self.dir, &mut files)?;
        files.sort();
        let mut outputs = Vec::new();
        for f in files {
            let rel = f.strip_prefix(&self.dir).unwrap_or(&f).to_string_lossy().replace('\\', "/");
            if rel == MANIFEST_FILE {
                continue;
            }
            outputs.push(FileHash { path: rel, sha256: hash_file(&f)? });
        }
        self.manifest.outputs = outputs;
        self.manifest.inputs =
            self.inputs.iter().map(|(p, h)| FileHash { path: p.clone(), sha256: h.clone() }).collect();
        self.manifest.partial = partial;
        self.manifest.finished_unix = now();
        let m = self.manifest.clone();
        self.write_json(MANIFEST_FILE, &m)?;
        Ok(m)
    }
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}
