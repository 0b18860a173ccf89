//! Exact cosine-similarity retrieval over an immutable patch index.
//!
//! Search is a deliberate linear scan: pools are small (thousands of
//! entries), exactness makes oracle testing trivial, and there is no
//! approximate structure to tune. Results keep only entries strictly above
//! the similarity threshold, sorted by descending similarity with ties
//! broken by ascending patch id for cross-platform determinism.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::bpe::Vocabulary;
use crate::corpus::{Label, PatchRecord};
use crate::embedder::{EmbeddingModel, PatchVector, MIN_NORM};
use crate::linalg;

/// Errors from index construction and querying.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RetrievalError {
    /// A vector involved in a cosine has (near-)zero norm.
    DegenerateVector,
    /// An unlabeled record cannot enter the index.
    UnlabeledRecord(String),
}

impl fmt::Display for RetrievalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RetrievalError::DegenerateVector => {
                write!(f, "zero-norm vector has no cosine similarity")
            }
            RetrievalError::UnlabeledRecord(id) => {
                write!(f, "record {id:?} is unlabeled and cannot be indexed")
            }
        }
    }
}

impl core::error::Error for RetrievalError {}

/// Cosine similarity, clamped to `[−1, 1]` against rounding.
pub fn cosine(u: &PatchVector, v: &PatchVector) -> Result<f64, RetrievalError> {
    let nu = linalg::norm(&u.values);
    let nv = linalg::norm(&v.values);
    if nu < MIN_NORM || nv < MIN_NORM {
        return Err(RetrievalError::DegenerateVector);
    }
    let c = linalg::dot(&u.values, &v.values) / (nu * nv);
    Ok(c.clamp(-1.0, 1.0))
}

/// One indexed training-pool patch.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub patch_id: String,
    pub vector: PatchVector,
    pub label: Label,
    pub tool: String,
    pub bug_id: String,
}

/// Immutable vector index over a training pool.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex {
    /// Entries in input-record order.
    pub entries: Vec<IndexEntry>,
    /// Hex checksum of the embedding checkpoint this index was built with;
    /// queries must use the same model.
    pub model_fingerprint: String,
}

/// Query parameters: keep at most `k` results with similarity strictly
/// greater than `beta`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RetrievalConfig {
    pub k: usize,
    pub beta: f64,
}

impl Default for RetrievalConfig {
    /// Published best settings: k = 10, β = 0.9.
    fn default() -> Self {
        RetrievalConfig { k: 10, beta: 0.9 }
    }
}

/// A retrieval hit.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedPatch {
    pub patch_id: String,
    pub similarity: f64,
    pub label: Label,
}

/// Why a record was left out of an index.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SkipReason {
    /// The diff tokenized to an empty sequence.
    EmptyTokenSequence,
    /// The embedding came out with (near-)zero norm.
    DegenerateEmbedding,
}

/// A record skipped during index construction.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SkippedRecord {
    pub patch_id: String,
    pub reason: SkipReason,
}

/// Result of [`build_index`]: the index plus any skipped records, which the
/// caller is expected to surface (log) and count.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexBuild {
    pub index: RetrievalIndex,
    pub skipped: Vec<SkippedRecord>,
}

/// Embeds every record's diff text (inference mode, no dropout) and builds
/// the index in input order. Unlabeled records are an error; records whose
/// diff tokenizes to nothing or embeds to a zero-norm vector are skipped and
/// reported.
pub fn build_index(
    model: &EmbeddingModel,
    vocab: &Vocabulary,
    records: &[PatchRecord],
    model_fingerprint: &str,
) -> Result<IndexBuild, RetrievalError> {
    let mut entries = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for record in records {
        if record.label == Label::Unlabeled {
            return Err(RetrievalError::UnlabeledRecord(record.patch_id.clone()));
        }
        let tokens = vocab.encode(&record.diff_text);
        if tokens.is_empty() {
            skipped.push(SkippedRecord {
                patch_id: record.patch_id.clone(),
                reason: SkipReason::EmptyTokenSequence,
            });
            continue;
        }
        let vector = model
            .embed(&tokens)
            .expect("non-empty in-vocabulary tokens embed cleanly");
        if vector.norm() < MIN_NORM {
            skipped.push(SkippedRecord {
                patch_id: record.patch_id.clone(),
                reason: SkipReason::DegenerateEmbedding,
            });
            continue;
        }
        entries.push(IndexEntry {
            patch_id: record.patch_id.clone(),
            vector,
            label: record.label,
            tool: record.tool.clone(),
            bug_id: record.bug_id.clone(),
        });
    }
    Ok(IndexBuild {
        index: RetrievalIndex {
            entries,
            model_fingerprint: model_fingerprint.to_string(),
        },
        skipped,
    })
}

/// Thresholded top-k query. Entries whose id equals `exclude_id` are never
/// returned, so a patch cannot demonstrate itself.
pub fn retrieve(
    index: &RetrievalIndex,
    query: &PatchVector,
    config: &RetrievalConfig,
    exclude_id: Option<&str>,
) -> Result<Vec<RetrievedPatch>, RetrievalError> {
    if linalg::norm(&query.values) < MIN_NORM {
        return Err(RetrievalError::DegenerateVector);
    }
    let mut hits: Vec<RetrievedPatch> = Vec::new();
    for entry in &index.entries {
        if exclude_id == Some(entry.patch_id.as_str()) {
            continue;
        }
        let similarity = cosine(query, &entry.vector)?;
        if similarity > config.beta {
            hits.push(RetrievedPatch {
                patch_id: entry.patch_id.clone(),
                similarity,
                label: entry.label,
            });
        }
    }
    hits.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.patch_id.cmp(&b.patch_id))
    });
    hits.truncate(config.k);
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn vector(values: &[f64]) -> PatchVector {
        PatchVector::new(values.to_vec())
    }

    fn index_of(vectors: Vec<(&str, PatchVector)>) -> RetrievalIndex {
        RetrievalIndex {
            entries: vectors
                .into_iter()
                .map(|(id, v)| IndexEntry {
                    patch_id: id.to_string(),
                    vector: v,
                    label: Label::Correct,
                    tool: "T".to_string(),
                    bug_id: "B".to_string(),
                })
                .collect(),
            model_fingerprint: "test".to_string(),
        }
    }

    #[test]
    fn cosine_of_identical_vectors_is_one() {
        let v = vector(&[0.3, -0.7, 2.0]);
        assert_eq!(cosine(&v, &v).unwrap(), 1.0);
    }

    #[test]
    fn cosine_of_orthogonal_vectors_is_zero() {
        assert_eq!(
            cosine(&vector(&[1.0, 0.0]), &vector(&[0.0, 1.0])).unwrap(),
            0.0
        );
    }

    #[test]
    fn cosine_matches_scalar_arithmetic() {
        // (1,2,2)·(2,1,2) = 8; both norms are 3; 8/9.
        let c = cosine(&vector(&[1.0, 2.0, 2.0]), &vector(&[2.0, 1.0, 2.0])).unwrap();
        assert!((c - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn cosine_rejects_zero_vectors() {
        assert_eq!(
            cosine(&vector(&[0.0, 0.0]), &vector(&[1.0, 0.0])),
            Err(RetrievalError::DegenerateVector)
        );
    }

    /// Rotates a base direction by `angle` so the similarity to the base is
    /// exactly `cos(angle)`.
    fn unit_at(angle: f64) -> PatchVector {
        vector(&[libm::cos(angle), libm::sin(angle)])
    }

    #[test]
    fn retrieve_keeps_entries_above_threshold_in_order() {
        // Similarities to the query (1,0): 0.95, 0.92, 0.85.
        let index = index_of(vec![
            ("mid", unit_at(libm::acos(0.92))),
            ("low", unit_at(libm::acos(0.85))),
            ("high", unit_at(libm::acos(0.95))),
        ]);
        let query = vector(&[1.0, 0.0]);
        let config = RetrievalConfig { k: 2, beta: 0.9 };
        let hits = retrieve(&index, &query, &config, None).unwrap();
        let ids: Vec<&str> = hits.iter().map(|h| h.patch_id.as_str()).collect();
        assert_eq!(ids, vec!["high", "mid"]);
        assert!(hits[0].similarity > hits[1].similarity);
    }

    #[test]
    fn tight_threshold_returns_nothing() {
        let index = index_of(vec![
            ("a", unit_at(libm::acos(0.95))),
            ("b", unit_at(libm::acos(0.92))),
        ]);
        let config = RetrievalConfig { k: 10, beta: 0.99 };
        let hits = retrieve(&index, &vector(&[1.0, 0.0]), &config, None).unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn threshold_comparison_is_strict() {
        let index = index_of(vec![("exact", vector(&[1.0, 0.0]))]);
        // Similarity is exactly 1.0; β=1.0 must exclude it.
        let config = RetrievalConfig { k: 5, beta: 1.0 };
        let hits = retrieve(&index, &vector(&[1.0, 0.0]), &config, None).unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn ties_break_by_ascending_patch_id() {
        let v = unit_at(0.1);
        let index = index_of(vec![("zeta", v.clone()), ("alpha", v.clone()), ("mid", v)]);
        let config = RetrievalConfig { k: 3, beta: 0.5 };
        let hits = retrieve(&index, &vector(&[1.0, 0.0]), &config, None).unwrap();
        let ids: Vec<&str> = hits.iter().map(|h| h.patch_id.as_str()).collect();
        assert_eq!(ids, vec!["alpha", "mid", "zeta"]);
    }

    #[test]
    fn excluded_id_is_never_returned() {
        let index = index_of(vec![
            ("self", vector(&[1.0, 0.0])),
            ("other", unit_at(0.05)),
        ]);
        let config = RetrievalConfig { k: 5, beta: 0.5 };
        let hits = retrieve(&index, &vector(&[1.0, 0.0]), &config, Some("self")).unwrap();
        let ids: Vec<&str> = hits.iter().map(|h| h.patch_id.as_str()).collect();
        assert_eq!(ids, vec!["other"]);
    }

    #[test]
    fn default_config_is_k10_beta09() {
        let config = RetrievalConfig::default();
        assert_eq!(config.k, 10);
        assert_eq!(config.beta, 0.9);
    }

    #[test]
    fn degenerate_query_is_rejected() {
        let index = index_of(vec![("a", vector(&[1.0, 0.0]))]);
        assert_eq!(
            retrieve(&index, &vector(&[0.0, 0.0]), &RetrievalConfig::default(), None),
            Err(RetrievalError::DegenerateVector)
        );
    }

    #[test]
    fn build_index_maps_records_bijectively() {
        use crate::bpe::train_bpe;
        use crate::embedder::ModelConfig;

        let vocab = train_bpe(&["int x = 1;"], 260, 0).unwrap();
        let model = EmbeddingModel::new(ModelConfig::new(vocab.size()), 5);
        let records: Vec<PatchRecord> = (0..4)
            .map(|i| PatchRecord {
                patch_id: format!("p{i}"),
                tool: "T".to_string(),
                bug_id: "B-1".to_string(),
                diff_text: format!("--- a/x\n+++ b/x\n@@ -1,1 +1,1 @@\n-a\n+b{i}\n"),
                patched_fragment: format!("b{i}"),
                label: Label::Correct,
                dataset_tag: "t".to_string(),
            })
            .collect();
        let build = build_index(&model, &vocab, &records, "fp").unwrap();
        assert_eq!(build.index.entries.len(), 4);
        assert!(build.skipped.is_empty());
        for (entry, record) in build.index.entries.iter().zip(&records) {
            assert_eq!(entry.patch_id, record.patch_id);
        }
    }

    #[test]
    fn build_index_rejects_unlabeled_records() {
        use crate::bpe::Vocabulary;
        use crate::embedder::ModelConfig;

        let vocab = Vocabulary::bytes_only();
        let model = EmbeddingModel::new(ModelConfig::new(vocab.size()), 5);
        let record = PatchRecord {
            patch_id: "p0".to_string(),
            tool: "T".to_string(),
            bug_id: "B-1".to_string(),
            diff_text: "x".to_string(),
            patched_fragment: "x".to_string(),
            label: Label::Unlabeled,
            dataset_tag: "t".to_string(),
        };
        assert_eq!(
            build_index(&model, &vocab, &[record], "fp"),
            Err(RetrievalError::UnlabeledRecord("p0".to_string()))
        );
    }

    #[test]
    fn empty_train_set_builds_empty_index() {
        use crate::bpe::Vocabulary;
        use crate::embedder::ModelConfig;

        let vocab = Vocabulary::bytes_only();
        let model = EmbeddingModel::new(ModelConfig::new(vocab.size()), 5);
        let build = build_index(&model, &vocab, &[], "fp").unwrap();
        assert!(build.index.entries.is_empty());
        assert!(build.skipped.is_empty());
    }
}
