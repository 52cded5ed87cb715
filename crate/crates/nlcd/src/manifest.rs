use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, NlcdError, Result};
use crate::io::write_text;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Not applicable to this run (for example a decay fit of the zero
    /// solution); does not fail the run.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl Criterion {
    pub fn check(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Criterion { name: name.into(), status: if ok { Status::Pass } else { Status::Fail }, detail: detail.into() }
    }

    pub fn skipped(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Criterion { name: name.into(), status: Status::Skipped, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub study: String,
    pub spec_hash: String,
    pub tool_version: String,
    pub wall_time_s: f64,
    pub output_dir: PathBuf,
    /// Every emitted file except the manifest itself.
    pub files: Vec<FileEntry>,
    pub criteria: Vec<Criterion>,
    pub notes: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    /// True iff no criterion failed.
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Criterion> {
        self.criteria.iter().filter(|c| c.status == Status::Fail)
    }

    /// Writes `text` under the output directory and records it.
    pub fn emit(&mut self, rel: &str, text: &str) -> Result<()> {
        write_text(&self.output_dir.join(rel), text)?;
        self.files.push(FileEntry {
            path: rel.to_string(),
            bytes: text.len() as u64,
            sha256: sha256_hex(text.as_bytes()),
        });
        Ok(())
    }

    pub fn file(&self, rel: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.path == rel)
    }

    pub fn write(&self) -> Result<PathBuf> {
        let path = self.output_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| NlcdError::Other(e.to_string()))?;
        write_text(&path, &(text + "\n"))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| NlcdError::Other(format!("{}: {e}", path.display())))
    }
}
