//! Retrieval-index file: versioned binary with magic `PJIDXv1`, the
//! fingerprint of the embedding checkpoint it was built with, an entry
//! table, and a trailing checksum. Loading verifies the stored fingerprint
//! against the checkpoint the caller is about to query with and refuses a
//! mismatch, so stale indexes can never serve a retrained model.
//!
//! Vectors are stored as 64-bit reals: rebuilding an index from the same
//! model and records reproduces the file byte for byte.

use std::path::Path;

use patchvet_core::corpus::Label;
use patchvet_core::embedder::PatchVector;
use patchvet_core::retrieval::{IndexEntry, RetrievalIndex};

use super::{push_string, read_file, seal, unseal, write_file, ByteReader, FormatError};

const MAGIC: &str = "PJIDXv1";

/// Serializes an index to complete file bytes, trailing checksum included.
pub fn index_bytes(index: &RetrievalIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC.as_bytes());
    push_string(&mut out, &index.model_fingerprint);
    out.extend_from_slice(&(index.entries.len() as u32).to_le_bytes());
    for entry in &index.entries {
        push_string(&mut out, &entry.patch_id);
        out.push(match entry.label {
            Label::Correct => 0,
            Label::Overfitting => 1,
            Label::Unlabeled => unreachable!("indexes never hold unlabeled entries"),
        });
        push_string(&mut out, &entry.tool);
        push_string(&mut out, &entry.bug_id);
        out.extend_from_slice(&(entry.vector.values.len() as u32).to_le_bytes());
        for &v in &entry.vector.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    seal(out)
}

pub fn save_index(path: &Path, index: &RetrievalIndex) -> Result<(), FormatError> {
    write_file(path, &index_bytes(index))
}

/// Loads an index and checks it was built with the checkpoint whose
/// fingerprint is `expected_fingerprint`.
pub fn load_index(path: &Path, expected_fingerprint: &str) -> Result<RetrievalIndex, FormatError> {
    let bytes = read_file(path)?;
    let payload = unseal(&bytes, path)?;
    let mut reader = ByteReader::new(payload, path);
    if reader.take(MAGIC.len())? != MAGIC.as_bytes() {
        return Err(FormatError::BadMagic {
            path: path.to_path_buf(),
            expected: MAGIC,
        });
    }
    let model_fingerprint = reader.string()?;
    if model_fingerprint != expected_fingerprint {
        return Err(FormatError::FingerprintMismatch {
            path: path.to_path_buf(),
            expected: expected_fingerprint.to_string(),
            found: model_fingerprint,
        });
    }
    let count = reader.u32_le()? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let patch_id = reader.string()?;
        let label = match reader.byte()? {
            0 => Label::Correct,
            1 => Label::Overfitting,
            other => {
                return Err(FormatError::Malformed {
                    path: path.to_path_buf(),
                    message: format!("unknown label byte {other} for entry {patch_id:?}"),
                })
            }
        };
        let tool = reader.string()?;
        let bug_id = reader.string()?;
        let dim = reader.u32_le()? as usize;
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(reader.f64_le()?);
        }
        entries.push(IndexEntry {
            patch_id,
            vector: PatchVector::new(values),
            label,
            tool,
            bug_id,
        });
    }
    reader.finish()?;
    Ok(RetrievalIndex {
        entries,
        model_fingerprint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_index() -> RetrievalIndex {
        RetrievalIndex {
            entries: vec![
                IndexEntry {
                    patch_id: "p1".to_string(),
                    vector: PatchVector::new(vec![0.6, 0.8]),
                    label: Label::Correct,
                    tool: "Arja".to_string(),
                    bug_id: "Math-5".to_string(),
                },
                IndexEntry {
                    patch_id: "p2".to_string(),
                    vector: PatchVector::new(vec![1.0, 0.0]),
                    label: Label::Overfitting,
                    tool: "Tbar".to_string(),
                    bug_id: "Lang-1".to_string(),
                },
            ],
            model_fingerprint: "abc123".to_string(),
        }
    }

    #[test]
    fn index_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("patches.pjidx");
        let index = toy_index();
        save_index(&path, &index).unwrap();
        let loaded = load_index(&path, "abc123").unwrap();
        assert_eq!(loaded, index);
    }

    #[test]
    fn rebuilding_produces_identical_bytes() {
        assert_eq!(index_bytes(&toy_index()), index_bytes(&toy_index()));
    }

    #[test]
    fn fingerprint_mismatch_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("patches.pjidx");
        save_index(&path, &toy_index()).unwrap();
        match load_index(&path, "different") {
            Err(FormatError::FingerprintMismatch {
                expected, found, ..
            }) => {
                assert_eq!(expected, "different");
                assert_eq!(found, "abc123");
            }
            other => panic!("expected fingerprint mismatch, got {other:?}"),
        }
    }

    #[test]
    fn flipped_byte_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("patches.pjidx");
        save_index(&path, &toy_index()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_index(&path, "abc123"),
            Err(FormatError::ChecksumMismatch { .. })
        ));
    }
}
