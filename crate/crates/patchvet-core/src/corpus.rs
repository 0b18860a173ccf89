//! Patch records, exact deduplication, semantic-duplicate exclusion, and
//! cross-tool leave-one-out fold construction.
//!
//! The fold builder enforces the leak rule: a training patch whose diff text
//! equals a test patch's diff text (after newline normalization) is moved to
//! the fold's `excluded_ids` instead of the training pool, so a patch from
//! the held-out tool can never demonstrate itself.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Ground-truth correctness of a patch. `Overfitting` is the positive class
/// throughout the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Label {
    Correct,
    Overfitting,
    Unlabeled,
}

impl Label {
    /// The dataset-file spelling of this label.
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Correct => "correct",
            Label::Overfitting => "overfitting",
            Label::Unlabeled => "unlabeled",
        }
    }

    /// Parses the dataset-file spelling.
    pub fn parse(text: &str) -> Option<Label> {
        match text {
            "correct" => Some(Label::Correct),
            "overfitting" => Some(Label::Overfitting),
            "unlabeled" => Some(Label::Unlabeled),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One candidate patch produced by an APR tool for a benchmark bug.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PatchRecord {
    /// Unique id within a dataset.
    pub patch_id: String,
    /// Name of the APR tool that produced the patch.
    pub tool: String,
    /// Benchmark bug identifier, e.g. `Math-50`.
    pub bug_id: String,
    /// The unified diff of the patch.
    pub diff_text: String,
    /// Post-patch code region shown to the language model.
    pub patched_fragment: String,
    pub label: Label,
    /// Provenance tag of the source dataset.
    pub dataset_tag: String,
}

/// Errors from record validation and fold construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusError {
    /// Two records share a `patch_id`.
    DuplicateId(String),
    /// A required string field is empty; payload is (patch_id, field name).
    EmptyField(String, &'static str),
    /// An exclusion pair references a `patch_id` absent from the dataset.
    UnknownId(String),
    /// The requested target tool has no records.
    UnknownTool(String),
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::DuplicateId(id) => write!(f, "duplicate patch_id {id:?}"),
            CorpusError::EmptyField(id, field) => {
                write!(f, "record {id:?} has an empty required field {field:?}")
            }
            CorpusError::UnknownId(id) => write!(f, "unknown patch_id {id:?}"),
            CorpusError::UnknownTool(tool) => write!(f, "unknown tool {tool:?}"),
        }
    }
}

impl core::error::Error for CorpusError {}

/// Normalizes CRLF line endings to LF. Applied before every diff-text
/// equality comparison (deduplication and leak checks), which reads "string
/// matching" as byte equality after newline normalization.
pub fn normalize_newlines(text: &str) -> String {
    text.replace("\r\n", "\n")
}

/// Checks per-record invariants and id uniqueness across the dataset.
pub fn validate_records(records: &[PatchRecord]) -> Result<(), CorpusError> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for r in records {
        if r.patch_id.is_empty() {
            return Err(CorpusError::EmptyField(r.patch_id.clone(), "patch_id"));
        }
        if r.tool.is_empty() {
            return Err(CorpusError::EmptyField(r.patch_id.clone(), "tool"));
        }
        if r.diff_text.is_empty() {
            return Err(CorpusError::EmptyField(r.patch_id.clone(), "diff_text"));
        }
        if !seen.insert(&r.patch_id) {
            return Err(CorpusError::DuplicateId(r.patch_id.clone()));
        }
    }
    Ok(())
}

/// A record dropped by [`dedup_exact`], with the id of the record kept in
/// its place.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RemovedDuplicate {
    pub dropped_id: String,
    pub kept_id: String,
}

/// Result of [`dedup_exact`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DedupOutcome {
    /// Surviving records, in original input order.
    pub kept: Vec<PatchRecord>,
    /// Dropped records paired with their keepers.
    pub removed: Vec<RemovedDuplicate>,
}

/// Removes records whose `diff_text` is byte-identical (after newline
/// normalization) to an earlier record's; the first occurrence wins.
pub fn dedup_exact(records: Vec<PatchRecord>) -> DedupOutcome {
    let mut keeper_of: BTreeMap<String, String> = BTreeMap::new();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for record in records {
        let key = normalize_newlines(&record.diff_text);
        match keeper_of.get(&key) {
            Some(kept_id) => removed.push(RemovedDuplicate {
                dropped_id: record.patch_id.clone(),
                kept_id: kept_id.clone(),
            }),
            None => {
                keeper_of.insert(key, record.patch_id.clone());
                kept.push(record);
            }
        }
    }
    DedupOutcome { kept, removed }
}

/// Removes the second member of each semantically equivalent pair. Both ids
/// of every pair must exist in the input; pairs whose second member was
/// already removed by an earlier pair are fine.
pub fn apply_semantic_exclusions(
    records: Vec<PatchRecord>,
    exclusion_pairs: &[(String, String)],
) -> Result<Vec<PatchRecord>, CorpusError> {
    let known: BTreeSet<&str> = records.iter().map(|r| r.patch_id.as_str()).collect();
    let mut drop: BTreeSet<&str> = BTreeSet::new();
    for (first, second) in exclusion_pairs {
        if !known.contains(first.as_str()) {
            return Err(CorpusError::UnknownId(first.clone()));
        }
        if !known.contains(second.as_str()) {
            return Err(CorpusError::UnknownId(second.clone()));
        }
        drop.insert(second);
    }
    Ok(records
        .into_iter()
        .filter(|r| !drop.contains(r.patch_id.as_str()))
        .collect())
}

/// One leave-one-tool-out fold.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FoldSpec {
    /// The held-out APR tool whose patches form the test set.
    pub target_tool: String,
    /// Ids of the target tool's records (any label).
    pub test_ids: BTreeSet<String>,
    /// Ids of labeled records from all other tools, leak-filtered.
    pub train_ids: BTreeSet<String>,
    /// Labeled non-target records removed because their diff text matches a
    /// test record's diff text.
    pub excluded_ids: BTreeSet<String>,
}

/// Builds the fold for one target tool.
///
/// Test set: every record of `target_tool`. Training pool: every labeled
/// record of any other tool, except those whose normalized `diff_text`
/// equals some test record's — those land in `excluded_ids`. Unlabeled
/// non-target records belong to no fold component.
pub fn make_cross_tool_folds(
    records: &[PatchRecord],
    target_tool: &str,
) -> Result<FoldSpec, CorpusError> {
    if !records.iter().any(|r| r.tool == target_tool) {
        return Err(CorpusError::UnknownTool(target_tool.to_string()));
    }
    let test_diffs: BTreeSet<String> = records
        .iter()
        .filter(|r| r.tool == target_tool)
        .map(|r| normalize_newlines(&r.diff_text))
        .collect();

    let mut test_ids = BTreeSet::new();
    let mut train_ids = BTreeSet::new();
    let mut excluded_ids = BTreeSet::new();
    for r in records {
        if r.tool == target_tool {
            test_ids.insert(r.patch_id.clone());
        } else if r.label != Label::Unlabeled {
            if test_diffs.contains(&normalize_newlines(&r.diff_text)) {
                excluded_ids.insert(r.patch_id.clone());
            } else {
                train_ids.insert(r.patch_id.clone());
            }
        }
    }
    Ok(FoldSpec {
        target_tool: target_tool.to_string(),
        test_ids,
        train_ids,
        excluded_ids,
    })
}

/// The distinct tool names present in `records`, sorted.
pub fn all_tools(records: &[PatchRecord]) -> BTreeSet<String> {
    records.iter().map(|r| r.tool.clone()).collect()
}
