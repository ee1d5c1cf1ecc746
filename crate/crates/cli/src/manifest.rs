use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{stage, write_file, CliError};

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct FileRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct FailureRecord {
    pub method: String,
    pub param: String,
    pub error: String,
}

/// Everything needed to reproduce a run. Deliberately free of timestamps and
/// host details so identical runs give identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    pub files: Vec<FileRecord>,
    pub failures: Vec<FailureRecord>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, config: BTreeMap<String, String>) -> Self {
        Self {
            tool: "sysaware",
            version: env!("CARGO_PKG_VERSION"),
            core_version: sysaware_core::VERSION,
            command: command.to_string(),
            seed,
            config,
            files: Vec::new(),
            failures: Vec::new(),
        }
    }

    /// Writes `bytes` to `out/rel` and records its hash.
    pub fn write(&mut self, out: &Path, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_file(&out.join(rel), bytes)?;
        self.files.push(FileRecord {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn finish(mut self, out: &Path) -> Result<(), CliError> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let mut text = serde_json::to_string_pretty(&self).map_err(stage("serialize manifest"))?;
        text.push('\n');
        write_file(&out.join("manifest.json"), text.as_bytes())
    }
}
