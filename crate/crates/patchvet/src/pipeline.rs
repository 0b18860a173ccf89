//! The per-patch assessment pipeline: train fold artifacts (tokenizer,
//! embedder, retrieval index), then for each test patch retrieve similar
//! labeled patches, gather bug guidance, assemble the in-context prompt,
//! query the backend, and classify.

use std::collections::BTreeMap;
use std::path::Path;

use patchvet_core::bpe::{train_bpe, BpeError, Vocabulary};
use patchvet_core::corpus::PatchRecord;
use patchvet_core::embedder::{
    train, EmbedderError, EmbeddingModel, EncodedPatch, ModelConfig, TrainConfig,
};
use patchvet_core::guidance::{render_guidance_with, GuidanceBlock};
use patchvet_core::llm::{
    classify_standard, Backend, CorrectnessPrediction, LlmError, CANDIDATE_CORRECT,
    CANDIDATE_WRONG,
};
use patchvet_core::prompt::{
    assemble, render_test_patch, AssembledPrompt, Demonstration, PromptError,
};
use patchvet_core::retrieval::{
    build_index, retrieve, IndexBuild, RetrievalConfig, RetrievalError, RetrievalIndex,
    RetrievedPatch, SkippedRecord,
};

use crate::bugdir::{load_bug_context, BugDirError};
use crate::config::RunConfig;
use crate::formats::checkpoint;

/// Errors from artifact construction or single-patch assessment.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("tokenizer training failed: {0}")]
    Bpe(#[from] BpeError),
    #[error("embedder failed: {0}")]
    Embedder(#[from] EmbedderError),
    #[error("retrieval failed: {0}")]
    Retrieval(#[from] RetrievalError),
    #[error("prompt assembly failed: {0}")]
    Prompt(#[from] PromptError),
    #[error("backend query failed: {0}")]
    Llm(#[from] LlmError),
    #[error("bug context failed: {0}")]
    BugContext(#[from] BugDirError),
    #[error("retrieved patch {0:?} is missing from the training pool")]
    MissingTrainRecord(String),
}

/// Everything a fold needs to assess its test patches.
pub struct FoldArtifacts {
    pub vocab: Vocabulary,
    pub model: EmbeddingModel,
    pub index: RetrievalIndex,
    /// Training records the index could not embed.
    pub skipped: Vec<SkippedRecord>,
    /// Checkpoint fingerprint the index is pinned to.
    pub fingerprint: String,
}

pub fn model_config_from(cfg: &RunConfig, vocab_size: usize) -> ModelConfig {
    ModelConfig {
        vocab_size,
        d_emb: cfg.d_emb,
        d_hid: cfg.d_hid,
        d_out: cfg.d_out,
        dropout_rate: cfg.dropout_rate,
        temperature: cfg.temperature,
        max_input_tokens: cfg.max_input_tokens,
    }
}

pub fn train_config_from(cfg: &RunConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        seed,
    }
}

/// Trains the tokenizer and the contrastive embedder on a training pool.
///
/// The tokenizer sees both diff text and patched fragments (it also counts
/// prompt tokens later); the embedder trains on encoded diffs. Degenerate
/// pools degrade gracefully: no records → byte-level tokenizer and an
/// untrained (randomly initialized) model; fewer than two encodable diffs →
/// untrained model. The returned model is rounded through the checkpoint
/// number format, so in-memory runs match save/load runs exactly.
pub fn train_embedder(
    pool: &[PatchRecord],
    cfg: &RunConfig,
    seed: u64,
) -> Result<(Vocabulary, EmbeddingModel), PipelineError> {
    let vocab = if pool.is_empty() {
        Vocabulary::bytes_only()
    } else {
        let mut texts = Vec::with_capacity(pool.len() * 2);
        for r in pool {
            texts.push(r.diff_text.as_str());
            texts.push(r.patched_fragment.as_str());
        }
        train_bpe(&texts, cfg.vocab_target, seed)?
    };

    let mut model = EmbeddingModel::new(model_config_from(cfg, vocab.size()), seed);
    let encoded: Vec<EncodedPatch> = pool
        .iter()
        .map(|r| EncodedPatch {
            patch_id: r.patch_id.clone(),
            tokens: vocab.encode(&r.diff_text),
        })
        .filter(|p| !p.tokens.is_empty())
        .collect();
    if encoded.len() >= 2 {
        train(&mut model, &encoded, &train_config_from(cfg, seed))?;
    } else {
        log::warn!(
            "training pool has {} encodable diffs; embedder keeps its random initialization",
            encoded.len()
        );
    }
    Ok((vocab, checkpoint::quantize_like_checkpoint(&model, seed)))
}

/// Embeds a labeled pool into a retrieval index, logging skipped records.
pub fn build_index_for(
    model: &EmbeddingModel,
    vocab: &Vocabulary,
    pool: &[PatchRecord],
    fingerprint: &str,
) -> Result<IndexBuild, PipelineError> {
    let build = build_index(model, vocab, pool, fingerprint)?;
    for s in &build.skipped {
        log::warn!("index skipped {:?}: {:?}", s.patch_id, s.reason);
    }
    Ok(build)
}

/// Trains artifacts and indexes the training pool.
pub fn build_fold_artifacts(
    pool: &[PatchRecord],
    cfg: &RunConfig,
    seed: u64,
) -> Result<FoldArtifacts, PipelineError> {
    let (vocab, model) = train_embedder(pool, cfg, seed)?;
    let fingerprint = checkpoint::fingerprint(&checkpoint::checkpoint_bytes(&model, seed));
    let build = build_index_for(&model, &vocab, pool, &fingerprint)?;
    Ok(FoldArtifacts {
        vocab,
        model,
        index: build.index,
        skipped: build.skipped,
        fingerprint,
    })
}

/// The test patch fields assessment needs.
pub struct PatchInput<'a> {
    pub patch_id: &'a str,
    pub diff_text: &'a str,
    pub patched_fragment: &'a str,
    pub bug_id: &'a str,
}

impl<'a> PatchInput<'a> {
    pub fn from_record(r: &'a PatchRecord) -> Self {
        PatchInput {
            patch_id: &r.patch_id,
            diff_text: &r.diff_text,
            patched_fragment: &r.patched_fragment,
            bug_id: &r.bug_id,
        }
    }
}

/// One assessed patch with its full provenance.
pub struct AssessmentOutcome {
    pub patch_id: String,
    pub prediction: CorrectnessPrediction,
    pub prompt: AssembledPrompt,
    pub retrieved: Vec<RetrievedPatch>,
}

/// Embeds the test diff and retrieves demonstration candidates. A diff the
/// tokenizer cannot encode or the model embeds to zero norm yields no
/// demonstrations rather than an error: the pipeline still has the bug
/// guidance and the test patch to work with.
fn retrieve_demos(
    input: &PatchInput,
    artifacts: &FoldArtifacts,
    cfg: &RunConfig,
) -> Result<Vec<RetrievedPatch>, PipelineError> {
    let tokens = artifacts.vocab.encode(input.diff_text);
    if tokens.is_empty() {
        log::warn!("{}: diff encodes to no tokens; no demonstrations", input.patch_id);
        return Ok(Vec::new());
    }
    let query = artifacts.model.embed(&tokens)?;
    let retrieval_config = RetrievalConfig {
        k: cfg.k,
        beta: cfg.beta,
    };
    match retrieve(
        &artifacts.index,
        &query,
        &retrieval_config,
        Some(input.patch_id),
    ) {
        Ok(hits) => Ok(hits),
        Err(RetrievalError::DegenerateVector) => {
            log::warn!(
                "{}: diff embeds to a zero-norm vector; no demonstrations",
                input.patch_id
            );
            Ok(Vec::new())
        }
        Err(e) => Err(e.into()),
    }
}

/// Assesses one patch end to end.
///
/// `pool_by_id` must cover every id the index can return: demonstrations
/// show the retrieved patch's patched fragment, mirroring how the test
/// patch itself is presented.
pub fn assess_patch(
    input: &PatchInput,
    artifacts: &FoldArtifacts,
    pool_by_id: &BTreeMap<&str, &PatchRecord>,
    bug_root: Option<&Path>,
    cfg: &RunConfig,
    backend: &dyn Backend,
) -> Result<AssessmentOutcome, PipelineError> {
    let retrieved = retrieve_demos(input, artifacts, cfg)?;
    let mut demos = Vec::with_capacity(retrieved.len());
    for hit in &retrieved {
        let record = pool_by_id
            .get(hit.patch_id.as_str())
            .ok_or_else(|| PipelineError::MissingTrainRecord(hit.patch_id.clone()))?;
        demos.push(Demonstration::new(
            hit.patch_id.clone(),
            record.patched_fragment.clone(),
            hit.label,
            hit.similarity,
        )?);
    }

    let guidance: Vec<GuidanceBlock> = match bug_root {
        Some(root) => {
            let ctx = load_bug_context(root, input.bug_id)?;
            render_guidance_with(&ctx, &cfg.preambles)
        }
        None => Vec::new(),
    };

    let test_prompt = render_test_patch(input.patched_fragment)?;
    let prompt = assemble(
        &demos,
        &guidance,
        &test_prompt,
        cfg.budget,
        &artifacts.vocab,
        cfg.demo_order.as_demo_order(),
    )?;
    let distribution =
        backend.query_next_token(&prompt.text, &[CANDIDATE_WRONG, CANDIDATE_CORRECT])?;
    let prediction = classify_standard(&distribution)?;
    Ok(AssessmentOutcome {
        patch_id: input.patch_id.to_string(),
        prediction,
        prompt,
        retrieved,
    })
}
