//! `manifest.json`: one record per run, keyed by run id (`build`,
//! `regress cost-2`, ...), listing input and output digests. No timestamps,
//! so identical runs produce identical manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    /// Data rows for CSV files.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rejected: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config_hash: String,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub stats: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: BTreeMap<String, RunRecord>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Option<Manifest>> {
        let path = dir.join(MANIFEST_FILE);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CliError::io(path, e)),
        }
    }

    /// Inserts or replaces `record` under `run_id` in the directory's
    /// manifest, creating it if needed.
    pub fn upsert(dir: &Path, run_id: &str, record: RunRecord) -> Result<()> {
        let mut m = Manifest::read(dir)?.unwrap_or_default();
        m.runs.insert(run_id.to_string(), record);
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| CliError::io(path, e))
    }
}

/// Data rows of a CSV file with a header line and no embedded newlines.
fn csv_rows(bytes: &[u8]) -> usize {
    bytes.iter().filter(|&&b| b == b'\n').count().saturating_sub(1)
}

/// Writes files into one output directory and collects their entries.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    pub entries: Vec<FileEntry>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Outputs { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `bytes` to `name` (relative, may contain subdirectories).
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        let rows = name.ends_with(".csv").then(|| csv_rows(bytes));
        self.entries.push(FileEntry { name: name.to_string(), sha256: digest_hex(bytes), rows, rejected: None });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(digest_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn upsert_keeps_other_runs() {
        let dir = tempfile::tempdir().unwrap();
        let rec = |c: &str| RunRecord { command: c.into(), ..RunRecord::default() };
        Manifest::upsert(dir.path(), "build", rec("build")).unwrap();
        Manifest::upsert(dir.path(), "summary", rec("summary")).unwrap();
        Manifest::upsert(dir.path(), "build", rec("build")).unwrap();
        let m = Manifest::read(dir.path()).unwrap().unwrap();
        assert_eq!(m.runs.keys().collect::<Vec<_>>(), vec!["build", "summary"]);
    }

    #[test]
    fn csv_entries_count_data_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::create(dir.path()).unwrap();
        out.write("a.csv", b"h\n1\n2\n").unwrap();
        out.write("b.json", b"{}").unwrap();
        assert_eq!(out.entries[0].rows, Some(2));
        assert_eq!(out.entries[1].rows, None);
    }
}
