//! Mini-batch training loop with Adam-style adaptive moments.
//!
//! Deterministic under a fixed seed: epoch shuffles, negative sampling, and
//! dropout all derive from seeded ChaCha20 streams, and every integer draw
//! is taken over `u64` so 32- and 64-bit platforms agree.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::math;

use super::loss::{loss_gradient, Gradients};
use super::{build_training_batch, EmbedderError, EmbeddingModel, EncodedPatch};

/// Training hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Published defaults: learning rate 5e-5, batch size 64, 3 epochs.
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            batch_size: 64,
            epochs: 3,
            seed: 42,
        }
    }
}

/// One optimizer step's loss, for the training trace.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepLoss {
    pub epoch: usize,
    /// Global step index across epochs.
    pub step: usize,
    pub loss: f64,
}

/// SplitMix64 finalizer; used to derive independent sub-seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes `(base, a, b)` into an independent sub-seed. Used for epoch
/// shuffles and batch negative-sampling here, and by callers that need
/// per-fold or per-purpose seeds that do not collide.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(base ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)) ^ b)
}

/// In-place Fisher–Yates shuffle driven by `u64` draws.
fn shuffle(indices: &mut [usize], rng: &mut ChaCha20Rng) {
    for i in (1..indices.len()).rev() {
        let j = rng.gen_range(0..=i as u64) as usize;
        indices.swap(i, j);
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

struct AdamState {
    m: Gradients,
    v: Gradients,
    t: u64,
}

impl AdamState {
    fn new(model: &EmbeddingModel) -> Self {
        AdamState {
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut EmbeddingModel, grads: &Gradients, lr: f64) {
        self.t += 1;
        let bias1 = 1.0 - math::pow(ADAM_BETA1, self.t as f64);
        let bias2 = 1.0 - math::pow(ADAM_BETA2, self.t as f64);
        let params = model.parameters_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        let gs = grads.tensors();
        for (((param, m), v), g) in params.into_iter().zip(ms).zip(vs).zip(gs) {
            for i in 0..param.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                param[i] -= lr * m_hat / (math::sqrt(v_hat) + ADAM_EPSILON);
            }
        }
    }
}

/// Trains the model in place and returns the per-step loss trace.
///
/// Each epoch shuffles the pool, splits it into `batch_size` chunks (a
/// trailing chunk of one is merged into its predecessor, since a singleton
/// cannot supply a distinct negative; batch sizes below two are raised to
/// two), builds dropout triplets, and applies one Adam step per batch. Zero
/// epochs leave the model untouched and return an empty trace. Aborts with
/// [`EmbedderError::NonFiniteLoss`] if a step's loss is not finite.
pub fn train(
    model: &mut EmbeddingModel,
    pool: &[EncodedPatch],
    config: &TrainConfig,
) -> Result<Vec<StepLoss>, EmbedderError> {
    if pool.len() < 2 {
        return Err(EmbedderError::PoolTooSmall);
    }
    let batch_size = config.batch_size.max(2);
    let temperature = model.config().temperature;
    let mut adam = AdamState::new(model);
    let mut trace = Vec::new();
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..pool.len()).collect();
        let mut shuffle_rng =
            ChaCha20Rng::seed_from_u64(derive_seed(config.seed, 0x5348_5546, epoch as u64));
        shuffle(&mut order, &mut shuffle_rng);

        let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
        if batches.len() >= 2 && batches.last().is_some_and(|b| b.len() == 1) {
            let last = batches.pop().expect("checked non-empty");
            batches.last_mut().expect("checked length").extend(last);
        }

        for (batch_idx, batch) in batches.iter().enumerate() {
            let negative_seed = derive_seed(config.seed, epoch as u64, batch_idx as u64);
            let training_batch = build_training_batch(model, pool, batch, negative_seed)?;
            let (grads, loss) = loss_gradient(model, &training_batch, temperature)?;
            if !loss.mean.is_finite() {
                return Err(EmbedderError::NonFiniteLoss(epoch, step));
            }
            adam.step(model, &grads, config.learning_rate);
            trace.push(StepLoss {
                epoch,
                step,
                loss: loss.mean,
            });
            step += 1;
        }
    }
    Ok(trace)
}
