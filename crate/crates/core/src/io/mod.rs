//! Configuration, persistence, log ingestion and report emission.

pub mod analysis;
pub mod config;
pub mod report;
pub mod rollout_log;
pub mod rundir;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

pub use analysis::{analyze, AnalysisBundle, AnalyzeOptions};
pub use config::{parse_config, parse_config_str, RunConfigFile, RunOptions};
pub use report::{emit_report, ReportInput};
pub use rollout_log::{ingest_rollout_log, parse_rollout_log, LogGroup};
pub use rundir::{eval_to_dir, train_to_dir, RunSummary};

/// Environment variable naming the default output root.
pub const OUT_ROOT_ENV: &str = "CREDITLAB_OUT";

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
        }
    }
    let name = path
        .file_name()
        .ok_or_else(|| LabError::Config(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| LabError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| LabError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| LabError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Serialises records one per line.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serialises"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Files written into one output directory, recorded with content hashes.
#[derive(Debug, Clone, Default)]
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| LabError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), entries: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        write_atomic(&path, bytes)?;
        self.entries.retain(|e| e.file != name);
        self.entries.push(ManifestEntry {
            file: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    /// Writes `manifest.json` listing every file written so far, sorted by name.
    pub fn finish(mut self) -> Result<Vec<ManifestEntry>> {
        self.entries.sort_by(|a, b| a.file.cmp(&b.file));
        let body = serde_json::to_string_pretty(&self.entries).expect("manifest serialises");
        write_atomic(&self.root.join("manifest.json"), body.as_bytes())?;
        Ok(self.entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"hello").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"hello");
        let names: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn manifest_hashes_match_contents() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write("z.txt", b"abc").unwrap();
        out.write("a.txt", b"").unwrap();
        let entries = out.finish().unwrap();
        assert_eq!(entries[0].file, "a.txt");
        assert_eq!(entries[1].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let back: Vec<ManifestEntry> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, entries);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_text(Path::new("/nonexistent/x")), Err(LabError::Io { .. })));
    }
}
