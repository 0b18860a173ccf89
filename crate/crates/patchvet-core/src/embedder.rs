//! Contrastively trained patch encoder.
//!
//! The encoder maps a token sequence to a fixed-size vector: mean of token
//! embeddings, a two-layer projection with a `tanh` nonlinearity, then a
//! dropout layer fed by one of two independent random streams. Training
//! builds triplets where the anchor and its positive are the *same* patch
//! passed through the two dropout streams, and the negative is a different
//! patch from the mini-batch (first stream). The loss contrasts each anchor
//! against every in-batch positive and negative.
//!
//! Randomness is deterministic: streams are ChaCha20 with fixed stream ids
//! (0 = parameter init, 1 = first dropout, 2 = second dropout) and all
//! integer sampling is done over `u64` so results match across platforms.

mod loss;
mod train;

pub use loss::{contrastive_loss, loss_gradient, Gradients, LossBreakdown};
pub use train::{derive_seed, splitmix64, train, StepLoss, TrainConfig};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::linalg::Matrix;
use crate::math;

/// Errors from embedding, batch construction, and training.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbedderError {
    /// Asked to embed an empty token sequence.
    ZeroLengthInput,
    /// A token id is outside the model's vocabulary.
    TokenOutOfRange(u32),
    /// The patch pool (or a mini-batch) has fewer than two members, so a
    /// negative with a different source cannot be sampled.
    PoolTooSmall,
    /// An embedding involved in a cosine has (near-)zero norm.
    DegenerateVector,
    /// The loss temperature must be strictly positive.
    InvalidTemperature,
    /// Triplet lists have inconsistent lengths or an empty batch.
    BatchShapeMismatch,
    /// Training produced a non-finite loss; payload is (epoch, step).
    NonFiniteLoss(usize, usize),
}

impl fmt::Display for EmbedderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbedderError::ZeroLengthInput => write!(f, "cannot embed an empty token sequence"),
            EmbedderError::TokenOutOfRange(id) => {
                write!(f, "token id {id} is outside the model vocabulary")
            }
            EmbedderError::PoolTooSmall => {
                write!(f, "need at least two patches to form contrastive triplets")
            }
            EmbedderError::DegenerateVector => {
                write!(f, "zero-norm embedding has no cosine similarity")
            }
            EmbedderError::InvalidTemperature => {
                write!(f, "loss temperature must be strictly positive")
            }
            EmbedderError::BatchShapeMismatch => {
                write!(f, "triplet batch lists are empty or of unequal length")
            }
            EmbedderError::NonFiniteLoss(epoch, step) => {
                write!(f, "non-finite loss at epoch {epoch}, step {step}")
            }
        }
    }
}

impl core::error::Error for EmbedderError {}

/// Norms below this are treated as zero for cosine purposes.
pub(crate) const MIN_NORM: f64 = 1e-300;

/// Hyper-parameters and dimensions of an [`EmbeddingModel`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelConfig {
    pub vocab_size: usize,
    /// Token embedding width.
    pub d_emb: usize,
    /// Hidden projection width.
    pub d_hid: usize,
    /// Output vector width.
    pub d_out: usize,
    /// Probability of zeroing each output component during training.
    pub dropout_rate: f64,
    /// Temperature divisor applied to cosines inside the loss.
    pub temperature: f64,
    /// Inputs longer than this are tail-truncated before embedding.
    pub max_input_tokens: usize,
}

impl ModelConfig {
    /// Defaults: 64/128/64 dimensions, dropout 0.1, temperature 0.05,
    /// 512-token input limit.
    pub fn new(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            d_emb: 64,
            d_hid: 128,
            d_out: 64,
            dropout_rate: 0.1,
            temperature: 0.05,
            max_input_tokens: 512,
        }
    }
}

/// Which dropout stream a forward pass draws its mask from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutStream {
    /// No dropout: inference mode, deterministic.
    Off,
    /// The anchor/negative stream.
    First,
    /// The positive stream.
    Second,
}

/// A patch embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchVector {
    pub values: Vec<f64>,
}

impl PatchVector {
    pub fn new(values: Vec<f64>) -> Self {
        PatchVector { values }
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.values)
    }
}

/// A tokenized patch ready for embedding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPatch {
    pub patch_id: String,
    pub tokens: Vec<u32>,
}

/// Everything a forward pass touched, kept for backpropagation. Dropout
/// masks are recorded so gradients are exact for the masks actually drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Truncated token ids actually consumed.
    pub tokens: Vec<u32>,
    /// Mean of the token embeddings.
    pub mean_embedding: Vec<f64>,
    /// Post-`tanh` hidden activations.
    pub hidden: Vec<f64>,
    /// Per-component multiplier: `0` or `1/(1−rate)`; all ones when off.
    pub dropout_mask: Vec<f64>,
    /// Final output vector (mask applied).
    pub output: Vec<f64>,
}

impl ForwardTrace {
    pub fn vector(&self) -> PatchVector {
        PatchVector::new(self.output.clone())
    }
}

/// Aligned anchor/positive/negative embeddings for one mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletBatch {
    pub anchors: Vec<PatchVector>,
    pub positives: Vec<PatchVector>,
    pub negatives: Vec<PatchVector>,
    /// Patch id behind each anchor (and its positive).
    pub anchor_ids: Vec<String>,
    /// Patch id behind each negative; differs from the anchor id at the
    /// same position.
    pub negative_ids: Vec<String>,
}

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub(crate) fn validate(&self) -> Result<(), EmbedderError> {
        let n = self.anchors.len();
        if n == 0
            || self.positives.len() != n
            || self.negatives.len() != n
            || self.anchor_ids.len() != n
            || self.negative_ids.len() != n
        {
            return Err(EmbedderError::BatchShapeMismatch);
        }
        Ok(())
    }
}

/// Like [`TripletBatch`] but carrying full forward traces, as needed by
/// [`loss_gradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub anchor_traces: Vec<ForwardTrace>,
    pub positive_traces: Vec<ForwardTrace>,
    pub negative_traces: Vec<ForwardTrace>,
    pub anchor_ids: Vec<String>,
    pub negative_ids: Vec<String>,
}

impl TrainingBatch {
    pub fn len(&self) -> usize {
        self.anchor_traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchor_traces.is_empty()
    }

    /// Drops the traces, keeping only the output vectors.
    pub fn vectors(&self) -> TripletBatch {
        TripletBatch {
            anchors: self.anchor_traces.iter().map(ForwardTrace::vector).collect(),
            positives: self.positive_traces.iter().map(ForwardTrace::vector).collect(),
            negatives: self.negative_traces.iter().map(ForwardTrace::vector).collect(),
            anchor_ids: self.anchor_ids.clone(),
            negative_ids: self.negative_ids.clone(),
        }
    }
}

/// The patch encoder. Parameters are `f64`; all transcendentals go through
/// [`crate::math`] so embeddings are bit-identical across platforms.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    config: ModelConfig,
    /// vocab_size × d_emb.
    token_table: Matrix,
    /// d_emb × d_hid; applied as `W1ᵀ·x`.
    proj_w1: Matrix,
    proj_b1: Vec<f64>,
    /// d_hid × d_out; applied as `W2ᵀ·h`.
    proj_w2: Matrix,
    proj_b2: Vec<f64>,
    rng_dropout_1: ChaCha20Rng,
    rng_dropout_2: ChaCha20Rng,
}

/// ChaCha stream ids; the dropout streams never share state with each other
/// or with parameter initialization.
const STREAM_INIT: u64 = 0;
const STREAM_DROPOUT_1: u64 = 1;
const STREAM_DROPOUT_2: u64 = 2;

fn seeded_stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl EmbeddingModel {
    /// Initializes parameters from `seed`: token embeddings and projection
    /// weights uniform in `±sqrt(6/(fan_in+fan_out))`, biases zero.
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        let mut rng = seeded_stream(seed, STREAM_INIT);
        let mut uniform_matrix = |rows: usize, cols: usize, fan_in: usize, fan_out: usize| {
            let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
            let mut m = Matrix::zeros(rows, cols);
            for v in m.as_mut_slice() {
                *v = (rng.gen::<f64>() * 2.0 - 1.0) * limit;
            }
            m
        };
        let token_table = uniform_matrix(config.vocab_size, config.d_emb, 1, config.d_emb);
        let proj_w1 = uniform_matrix(config.d_emb, config.d_hid, config.d_emb, config.d_hid);
        let proj_w2 = uniform_matrix(config.d_hid, config.d_out, config.d_hid, config.d_out);
        let proj_b1 = vec![0.0; config.d_hid];
        let proj_b2 = vec![0.0; config.d_out];
        EmbeddingModel {
            token_table,
            proj_w1,
            proj_b1,
            proj_w2,
            proj_b2,
            rng_dropout_1: seeded_stream(seed, STREAM_DROPOUT_1),
            rng_dropout_2: seeded_stream(seed, STREAM_DROPOUT_2),
            config,
        }
    }

    /// Rebuilds a model from explicit parameter tensors (checkpoint load or
    /// hand-set toy models). Dropout streams restart from `seed`.
    ///
    /// # Panics
    ///
    /// Panics if any tensor's shape disagrees with `config`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        config: ModelConfig,
        seed: u64,
        token_table: Matrix,
        proj_w1: Matrix,
        proj_b1: Vec<f64>,
        proj_w2: Matrix,
        proj_b2: Vec<f64>,
    ) -> Self {
        assert_eq!(
            (token_table.rows(), token_table.cols()),
            (config.vocab_size, config.d_emb),
            "token table shape mismatch"
        );
        assert_eq!(
            (proj_w1.rows(), proj_w1.cols()),
            (config.d_emb, config.d_hid),
            "first projection shape mismatch"
        );
        assert_eq!(proj_b1.len(), config.d_hid, "first bias length mismatch");
        assert_eq!(
            (proj_w2.rows(), proj_w2.cols()),
            (config.d_hid, config.d_out),
            "second projection shape mismatch"
        );
        assert_eq!(proj_b2.len(), config.d_out, "second bias length mismatch");
        EmbeddingModel {
            token_table,
            proj_w1,
            proj_b1,
            proj_w2,
            proj_b2,
            rng_dropout_1: seeded_stream(seed, STREAM_DROPOUT_1),
            rng_dropout_2: seeded_stream(seed, STREAM_DROPOUT_2),
            config,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn token_table(&self) -> &Matrix {
        &self.token_table
    }

    pub fn proj_w1(&self) -> &Matrix {
        &self.proj_w1
    }

    pub fn proj_b1(&self) -> &[f64] {
        &self.proj_b1
    }

    pub fn proj_w2(&self) -> &Matrix {
        &self.proj_w2
    }

    pub fn proj_b2(&self) -> &[f64] {
        &self.proj_b2
    }

    /// Mutable views of all five parameter tensors, in checkpoint order.
    /// Used by the optimizer and by finite-difference tests.
    pub fn parameters_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.token_table.as_mut_slice(),
            self.proj_w1.as_mut_slice(),
            &mut self.proj_b1,
            self.proj_w2.as_mut_slice(),
            &mut self.proj_b2,
        ]
    }

    /// Read-only views of all five parameter tensors, in checkpoint order.
    pub fn parameters(&self) -> [&[f64]; 5] {
        [
            self.token_table.as_slice(),
            self.proj_w1.as_slice(),
            &self.proj_b1,
            self.proj_w2.as_slice(),
            &self.proj_b2,
        ]
    }

    fn forward_with_mask(
        &self,
        tokens: &[u32],
        dropout_mask: Vec<f64>,
    ) -> Result<ForwardTrace, EmbedderError> {
        if tokens.is_empty() {
            return Err(EmbedderError::ZeroLengthInput);
        }
        let take = tokens.len().min(self.config.max_input_tokens);
        let tokens = &tokens[..take];
        let mut mean = vec![0.0; self.config.d_emb];
        for &t in tokens {
            if t as usize >= self.config.vocab_size {
                return Err(EmbedderError::TokenOutOfRange(t));
            }
            crate::linalg::axpy(&mut mean, self.token_table.row(t as usize), 1.0);
        }
        let inv_len = 1.0 / tokens.len() as f64;
        for v in &mut mean {
            *v *= inv_len;
        }
        let mut hidden = self.proj_w1.mul_vec_transposed(&mean);
        for (h, b) in hidden.iter_mut().zip(&self.proj_b1) {
            *h = math::tanh(*h + b);
        }
        let mut output = self.proj_w2.mul_vec_transposed(&hidden);
        for ((o, b), m) in output.iter_mut().zip(&self.proj_b2).zip(&dropout_mask) {
            *o = (*o + b) * m;
        }
        Ok(ForwardTrace {
            tokens: tokens.to_vec(),
            mean_embedding: mean,
            hidden,
            dropout_mask,
            output,
        })
    }

    fn draw_mask(&mut self, stream: DropoutStream) -> Vec<f64> {
        let rate = self.config.dropout_rate;
        let d_out = self.config.d_out;
        match stream {
            DropoutStream::Off => vec![1.0; d_out],
            DropoutStream::First | DropoutStream::Second => {
                let rng = if stream == DropoutStream::First {
                    &mut self.rng_dropout_1
                } else {
                    &mut self.rng_dropout_2
                };
                let keep_scale = 1.0 / (1.0 - rate);
                (0..d_out)
                    .map(|_| {
                        // Always consume one draw per component so stream
                        // positions are independent of the rate.
                        let u: f64 = rng.gen();
                        if u < rate {
                            0.0
                        } else {
                            keep_scale
                        }
                    })
                    .collect()
            }
        }
    }

    /// Deterministic inference-mode embedding (no dropout).
    pub fn embed(&self, tokens: &[u32]) -> Result<PatchVector, EmbedderError> {
        Ok(self.forward_trace(tokens)?.vector())
    }

    /// Inference-mode forward pass returning the full trace.
    pub fn forward_trace(&self, tokens: &[u32]) -> Result<ForwardTrace, EmbedderError> {
        self.forward_with_mask(tokens, vec![1.0; self.config.d_out])
    }

    /// Forward pass drawing a dropout mask from the chosen stream; advances
    /// that stream's state.
    pub fn embed_with_stream(
        &mut self,
        tokens: &[u32],
        stream: DropoutStream,
    ) -> Result<ForwardTrace, EmbedderError> {
        let mask = self.draw_mask(stream);
        self.forward_with_mask(tokens, mask)
    }
}

/// Builds the triplets for one mini-batch: for each position `i` of `batch`
/// (indices into `pool`), the anchor is `pool[batch[i]]` through the first
/// dropout stream, the negative is a uniformly sampled different batch
/// member through the first stream, and the positive is the anchor's patch
/// again through the second stream. Evaluation order per position is
/// anchor, negative, positive, so stream consumption is reproducible.
pub fn build_training_batch(
    model: &mut EmbeddingModel,
    pool: &[EncodedPatch],
    batch: &[usize],
    seed: u64,
) -> Result<TrainingBatch, EmbedderError> {
    if pool.len() < 2 || batch.len() < 2 {
        return Err(EmbedderError::PoolTooSmall);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = TrainingBatch {
        anchor_traces: Vec::with_capacity(batch.len()),
        positive_traces: Vec::with_capacity(batch.len()),
        negative_traces: Vec::with_capacity(batch.len()),
        anchor_ids: Vec::with_capacity(batch.len()),
        negative_ids: Vec::with_capacity(batch.len()),
    };
    for (i, &pool_idx) in batch.iter().enumerate() {
        let patch = &pool[pool_idx];
        let anchor = model.embed_with_stream(&patch.tokens, DropoutStream::First)?;
        // Uniform over batch positions other than i (u64 draw, then skip).
        let r = rng.gen_range(0..batch.len() as u64 - 1) as usize;
        let j = if r >= i { r + 1 } else { r };
        let neg_patch = &pool[batch[j]];
        let negative = model.embed_with_stream(&neg_patch.tokens, DropoutStream::First)?;
        let positive = model.embed_with_stream(&patch.tokens, DropoutStream::Second)?;
        out.anchor_traces.push(anchor);
        out.negative_traces.push(negative);
        out.positive_traces.push(positive);
        out.anchor_ids.push(patch.patch_id.clone());
        out.negative_ids.push(neg_patch.patch_id.clone());
    }
    Ok(out)
}

/// [`build_training_batch`] reduced to the output vectors.
pub fn build_triplet_batch(
    model: &mut EmbeddingModel,
    pool: &[EncodedPatch],
    batch: &[usize],
    seed: u64,
) -> Result<TripletBatch, EmbedderError> {
    Ok(build_training_batch(model, pool, batch, seed)?.vectors())
}
