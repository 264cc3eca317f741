//! Append-only audit log, one JSON entry per line. The log is the only persistent state;
//! the case index is rebuilt from it at startup.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Ingested,
    Analyzed,
    Decided,
    FlagRaised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub sequence: u64,
    pub timestamp: DateTime<Utc>,
    pub actor: String,
    pub event: EventKind,
    pub case_id: String,
    pub payload: serde_json::Value,
    /// Hex SHA-256 of the compact JSON rendering of `payload`.
    pub digest: String,
}

pub fn digest(payload: &serde_json::Value) -> String {
    let bytes = Sha256::digest(payload.to_string().as_bytes());
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug)]
pub struct Store {
    path: PathBuf,
    file: File,
    next: u64,
}

impl Store {
    /// Opens (creating if needed) the log at `path` and returns it with its verified
    /// entries.
    pub fn open(path: &Path) -> Result<(Store, Vec<AuditEntry>), StoreError> {
        let io = |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(path)
            .map_err(io)?;
        let mut entries: Vec<AuditEntry> = Vec::new();
        for (k, line) in BufReader::new(&file).lines().enumerate() {
            let line = line.map_err(io)?;
            let corrupt = |message: String| StoreError::Corrupt {
                path: path.to_path_buf(),
                line: k + 1,
                message,
            };
            if line.trim().is_empty() {
                continue;
            }
            let e: AuditEntry = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            let expected = entries.len() as u64 + 1;
            if e.sequence != expected {
                return Err(corrupt(format!(
                    "sequence {} where {expected} was expected",
                    e.sequence
                )));
            }
            if digest(&e.payload) != e.digest {
                return Err(corrupt("payload digest mismatch".into()));
            }
            entries.push(e);
        }
        let next = entries.len() as u64 + 1;
        Ok((
            Store {
                path: path.to_path_buf(),
                file,
                next,
            },
            entries,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes and syncs one entry, assigning the next sequence number.
    pub fn append(
        &mut self,
        actor: &str,
        event: EventKind,
        case_id: &str,
        payload: serde_json::Value,
        timestamp: DateTime<Utc>,
    ) -> Result<AuditEntry, StoreError> {
        let entry = AuditEntry {
            sequence: self.next,
            timestamp,
            actor: actor.to_string(),
            event,
            case_id: case_id.to_string(),
            digest: digest(&payload),
            payload,
        };
        let mut line = serde_json::to_string(&entry).expect("entries serialize");
        line.push('\n');
        let io = |source| StoreError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.write_all(line.as_bytes()).map_err(io)?;
        self.file.sync_data().map_err(io)?;
        self.next += 1;
        Ok(entry)
    }
}
