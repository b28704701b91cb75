//! The data-directory manifest.
//!
//! A cohort on disk is a flat directory of EEGB files plus one
//! `manifest.json` listing them: subject, condition, filename, and the
//! SHA-256 of the file's bytes. The manifest is the single source of truth
//! for what a directory contains — ingesting externally recorded data needs
//! only EEGB conversion plus this index, and corrupted or swapped files are
//! caught by the hash before any analysis starts.
//!
//! Loading is strict: every listed file must exist, hash as recorded, decode
//! as EEGB, and agree with the manifest about its condition; every subject
//! must contribute exactly one rest and one meditation recording. Anything
//! else is a validation failure, reported before any output is produced.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use medeeg_core::{Condition, SubjectRecordings};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eegb;

/// Name of the index file inside a data directory.
pub const MANIFEST_NAME: &str = "manifest.json";

/// One row of the index: where a recording lives and what it claims to be.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub condition: Condition,
    /// Filename relative to the directory holding the manifest.
    pub file: String,
    /// Lowercase hex SHA-256 of the file's bytes.
    pub sha256: String,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Malformed(String),
    #[error("{file}: stored hash does not match file contents")]
    HashMismatch { file: String },
    #[error("{file}: manifest says {expected} but the file header says {found}")]
    ConditionMismatch {
        file: String,
        expected: Condition,
        found: Condition,
    },
    #[error("subject {subject}: expected one rest and one meditation recording, found {detail}")]
    BadCoverage { subject: String, detail: String },
    #[error("{file}: {source}")]
    BadRecording { file: String, source: eegb::EegbError },
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Canonical filename for one recording: `s00_rest.eegb` and friends.
pub fn recording_filename(subject_id: &str, condition: Condition) -> String {
    format!("{subject_id}_{condition}.eegb")
}

/// Write `manifest.json` into `dir` (pretty-printed, trailing newline).
pub fn write_manifest(dir: &Path, entries: &[ManifestEntry]) -> std::io::Result<()> {
    let mut json = serde_json::to_string_pretty(entries).expect("manifest entries serialize");
    json.push('\n');
    fs::write(dir.join(MANIFEST_NAME), json)
}

/// Read and parse `manifest.json` from `dir`.
pub fn load_manifest(dir: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|source| ManifestError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| ManifestError::Malformed(e.to_string()))
}

/// Load a full cohort from a data directory, verifying it as described in
/// the module docs. Subjects come back sorted by id; recordings are raw
/// (no filtering applied).
pub fn load_subjects(dir: &Path) -> Result<Vec<SubjectRecordings>, ManifestError> {
    let entries = load_manifest(dir)?;
    if entries.is_empty() {
        return Err(ManifestError::Malformed("manifest lists no recordings".into()));
    }

    // subject id → (rest, meditation), filled as entries are verified.
    let mut by_subject: BTreeMap<String, [Option<medeeg_core::Recording>; 2]> = BTreeMap::new();
    for entry in &entries {
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|source| ManifestError::Unreadable {
            path: path.display().to_string(),
            source,
        })?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(ManifestError::HashMismatch {
                file: entry.file.clone(),
            });
        }
        let rec = eegb::decode(&bytes, &entry.subject_id).map_err(|source| {
            ManifestError::BadRecording {
                file: entry.file.clone(),
                source,
            }
        })?;
        if rec.condition != entry.condition {
            return Err(ManifestError::ConditionMismatch {
                file: entry.file.clone(),
                expected: entry.condition,
                found: rec.condition,
            });
        }
        let slot = &mut by_subject.entry(entry.subject_id.clone()).or_default()
            [entry.condition.label() as usize];
        if slot.is_some() {
            return Err(ManifestError::BadCoverage {
                subject: entry.subject_id.clone(),
                detail: format!("two {} recordings", entry.condition),
            });
        }
        *slot = Some(rec);
    }

    let mut subjects = Vec::with_capacity(by_subject.len());
    for (subject_id, [rest, meditation]) in by_subject {
        match (rest, meditation) {
            (Some(rest), Some(meditation)) => subjects.push(SubjectRecordings {
                subject_id,
                rest,
                meditation,
            }),
            (rest, _) => {
                let missing = if rest.is_none() { Condition::Rest } else { Condition::Meditation };
                return Err(ManifestError::BadCoverage {
                    subject: subject_id,
                    detail: format!("no {missing} recording"),
                });
            }
        }
    }
    Ok(subjects)
}
