//! On-disk artifact formats: tokenizer vocabulary, embedding checkpoint,
//! retrieval index, prediction files, and evaluation reports.
//!
//! Binary formats share one shape: a 7-byte ASCII magic, a payload, and a
//! trailing SHA-256 of everything before it. Readers verify the checksum
//! before trusting any field.

pub mod checkpoint;
pub mod index;
pub mod predictions;
pub mod report;
pub mod vocab;

use std::path::PathBuf;

use sha2::{Digest, Sha256};

/// Errors from reading or writing artifact files.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: expected magic {expected:?}")]
    BadMagic { path: PathBuf, expected: &'static str },
    #[error("{path}: file is truncated or has trailing garbage")]
    Truncated { path: PathBuf },
    #[error("{path}: checksum mismatch — file is corrupted")]
    ChecksumMismatch { path: PathBuf },
    #[error("{path}: built against checkpoint {found}, current checkpoint is {expected}")]
    FingerprintMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
}

/// Hex-encoded SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Appends the SHA-256 of the current buffer contents to the buffer.
fn seal(mut bytes: Vec<u8>) -> Vec<u8> {
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    bytes
}

/// Verifies the trailing SHA-256 and returns the payload (magic included).
fn unseal<'a>(bytes: &'a [u8], path: &std::path::Path) -> Result<&'a [u8], FormatError> {
    const DIGEST_LEN: usize = 32;
    if bytes.len() < DIGEST_LEN {
        return Err(FormatError::Truncated {
            path: path.to_path_buf(),
        });
    }
    let (payload, stored) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(payload).as_slice() != stored {
        return Err(FormatError::ChecksumMismatch {
            path: path.to_path_buf(),
        });
    }
    Ok(payload)
}

/// Sequential reader over a sealed payload.
struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a std::path::Path,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8], path: &'a std::path::Path) -> Self {
        ByteReader { bytes, pos: 0, path }
    }

    fn truncated(&self) -> FormatError {
        FormatError::Truncated {
            path: self.path.to_path_buf(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).ok_or_else(|| self.truncated())?;
        if end > self.bytes.len() {
            return Err(self.truncated());
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32_le(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64_le(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_le(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn byte(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    /// A u32 length prefix followed by that many UTF-8 bytes.
    fn string(&mut self) -> Result<String, FormatError> {
        let len = self.u32_le()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| FormatError::Malformed {
            path: self.path.to_path_buf(),
            message: "string field is not valid UTF-8".to_string(),
        })
    }

    fn finish(self) -> Result<(), FormatError> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(self.truncated())
        }
    }
}

fn push_string(out: &mut Vec<u8>, text: &str) {
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
}

fn read_file(path: &std::path::Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a text artifact, creating parent directories as needed.
pub fn write_text(path: &std::path::Path, text: &str) -> Result<(), FormatError> {
    write_file(path, text.as_bytes())
}

fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<(), FormatError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| FormatError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        }
    }
    std::fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}
