//! Output directory bookkeeping and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, C: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub started: String,
    pub finished: String,
    pub seed: u64,
    pub threads: usize,
    pub config: &'a C,
    pub files: Vec<FileRecord>,
    /// SHA-256 over the concatenated `path:sha256` lines of `files`.
    pub digest: String,
}

/// Collects files written into one output directory.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<FileRecord>,
    started: DateTime<Utc>,
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl Outputs {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), started: Utc::now() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `bytes` to `name` and records its digest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let p = self.path(name);
        let mut f = fs::File::create(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        f.write_all(bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        self.record(name, bytes);
        Ok(())
    }

    /// Records a file produced by some other writer.
    pub fn register(&mut self, name: &str) -> CliResult<()> {
        let p = self.path(name);
        let bytes = fs::read(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        self.record(name, &bytes);
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.files.retain(|f| f.path != name);
        self.files.push(FileRecord { path: name.into(), bytes: bytes.len() as u64, sha256: hex::encode(Sha256::digest(bytes)) });
    }

    pub fn finish<C: Serialize>(self, command: &str, seed: u64, threads: usize, config: &C) -> CliResult<Vec<FileRecord>> {
        let mut h = Sha256::new();
        for f in &self.files {
            h.update(format!("{}:{}\n", f.path, f.sha256));
        }
        let manifest = RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            started: stamp(self.started),
            finished: stamp(Utc::now()),
            seed,
            threads,
            config,
            files: self.files.clone(),
            digest: hex::encode(h.finalize()),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        let p = self.dir.join("manifest.json");
        fs::write(&p, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        Ok(self.files)
    }
}
