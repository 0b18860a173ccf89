//! The on-disk patch dataset: UTF-8, one JSON record per line.
//!
//! Record fields: `patch_id`, `tool`, `bug_id`, `diff_text`,
//! `patched_fragment`, `label` (`correct` | `overfitting` | `unlabeled`),
//! `dataset_tag`. Loading normalizes CRLF line endings inside text fields,
//! validates every record, and rejects duplicate ids. Exclusion lists are
//! plain text: one `id1,id2` pair per line, `#` starts a comment.

use std::path::{Path, PathBuf};

use patchvet_core::corpus::{self, CorpusError, Label, PatchRecord};

/// Errors from dataset and exclusion-list loading.
#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: not a JSON object: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: field {field:?} is missing or not usable")]
    Schema {
        path: PathBuf,
        line: usize,
        field: &'static str,
    },
    #[error("{path}: {source}")]
    Corpus {
        path: PathBuf,
        source: CorpusError,
    },
    #[error("{path}:{line}: expected \"id1,id2\"")]
    MalformedExclusion { path: PathBuf, line: usize },
}

fn string_field(
    object: &serde_json::Map<String, serde_json::Value>,
    field: &'static str,
    path: &Path,
    line: usize,
) -> Result<String, DatasetError> {
    object
        .get(field)
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| DatasetError::Schema {
            path: path.to_path_buf(),
            line,
            field,
        })
}

/// Loads and validates a dataset file. Blank lines are permitted and
/// skipped; every other line must be one record object.
pub fn load_dataset(path: &Path) -> Result<Vec<PatchRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| DatasetError::Json {
                path: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })?;
        let object = value.as_object().ok_or_else(|| DatasetError::Json {
            path: path.to_path_buf(),
            line: line_no,
            message: "line is valid JSON but not an object".to_string(),
        })?;

        let label_text = string_field(object, "label", path, line_no)?;
        let label = Label::parse(&label_text).ok_or(DatasetError::Schema {
            path: path.to_path_buf(),
            line: line_no,
            field: "label",
        })?;
        records.push(PatchRecord {
            patch_id: string_field(object, "patch_id", path, line_no)?,
            tool: string_field(object, "tool", path, line_no)?,
            bug_id: string_field(object, "bug_id", path, line_no)?,
            diff_text: corpus::normalize_newlines(&string_field(
                object, "diff_text", path, line_no,
            )?),
            patched_fragment: corpus::normalize_newlines(&string_field(
                object,
                "patched_fragment",
                path,
                line_no,
            )?),
            label,
            dataset_tag: string_field(object, "dataset_tag", path, line_no)?,
        });
    }
    corpus::validate_records(&records).map_err(|source| DatasetError::Corpus {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(records)
}

/// Loads an exclusion list: ordered `(keep_id, drop_id)` pairs.
pub fn load_exclusions(path: &Path) -> Result<Vec<(String, String)>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut pairs = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let malformed = || DatasetError::MalformedExclusion {
            path: path.to_path_buf(),
            line: line_no,
        };
        let (first, second) = line.split_once(',').ok_or_else(malformed)?;
        let (first, second) = (first.trim(), second.trim());
        if first.is_empty() || second.is_empty() || second.contains(',') {
            return Err(malformed());
        }
        pairs.push((first.to_string(), second.to_string()));
    }
    Ok(pairs)
}
