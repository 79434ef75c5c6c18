//! Append-only JSON-lines store of finished jobs, keyed by a digest of the
//! canonicalized job.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub job_hash: String,
    pub command: String,
    pub value: Value,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub tool_version: String,
}

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the compact JSON of `job`. Object keys serialize in sorted
/// order, so equal jobs hash equally whatever the input layout.
pub fn job_hash(job: &Value) -> String {
    let digest = Sha256::digest(job.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lookup {
    pub record: Option<ResultRecord>,
    /// Lines that did not parse as records.
    pub skipped: usize,
}

/// Newest record with this hash (and tool version, if given).
pub fn cache_lookup(path: &Path, hash: &str, version: Option<&str>) -> std::io::Result<Lookup> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == ErrorKind::NotFound => {
            return Ok(Lookup {
                record: None,
                skipped: 0,
            })
        }
        Err(e) => return Err(e),
    };
    let mut record = None;
    let mut skipped = 0;
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ResultRecord>(&line) {
            Ok(r) if r.job_hash == hash && version.map_or(true, |v| v == r.tool_version) => {
                record = Some(r)
            }
            Ok(_) => {}
            Err(_) => skipped += 1,
        }
    }
    Ok(Lookup { record, skipped })
}

/// Appends one record as a single write of one line.
pub fn cache_append(path: &Path, record: &ResultRecord) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut line = serde_json::to_string(record).map_err(std::io::Error::other)?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())
}
