//! Property tests for the patch encoder: analytic gradients against
//! central finite differences, the closed-form loss identity, input
//! truncation, and seeded determinism.

use proptest::prelude::*;
use patchvet_core::embedder::{
    build_training_batch, contrastive_loss, loss_gradient, EmbeddingModel, EncodedPatch,
    ModelConfig, PatchVector, TripletBatch,
};

fn toy_config(vocab_size: usize, d_emb: usize, d_hid: usize, d_out: usize) -> ModelConfig {
    ModelConfig {
        vocab_size,
        d_emb,
        d_hid,
        d_out,
        // Gradient checks run with dropout off so the loss is a smooth,
        // mask-free function of the parameters.
        dropout_rate: 0.0,
        temperature: 0.2,
        max_input_tokens: 16,
    }
}

fn pool_from(token_lists: &[Vec<u32>]) -> Vec<EncodedPatch> {
    token_lists
        .iter()
        .enumerate()
        .map(|(i, tokens)| EncodedPatch {
            patch_id: format!("p{i}"),
            tokens: tokens.clone(),
        })
        .collect()
}

/// Mean loss for the batch drawn with `batch_seed`, rebuilt from a fresh
/// clone so the dropout streams start from the same state every time.
fn loss_at(model: &EmbeddingModel, pool: &[EncodedPatch], batch: &[usize], batch_seed: u64) -> f64 {
    let mut m = model.clone();
    let traces = build_training_batch(&mut m, pool, batch, batch_seed).unwrap();
    let (_, loss) = loss_gradient(&m, &traces, m.config().temperature).unwrap();
    loss.mean
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn analytic_gradients_match_central_differences(
        seed in any::<u64>(),
        batch_seed in any::<u64>(),
        d_emb in 2usize..6,
        d_hid in 2usize..6,
        d_out in 2usize..6,
        token_lists in prop::collection::vec(prop::collection::vec(0u32..12, 1..6), 2..4),
    ) {
        let config = toy_config(12, d_emb, d_hid, d_out);
        let model = EmbeddingModel::new(config, seed);
        let pool = pool_from(&token_lists);
        let batch: Vec<usize> = (0..pool.len()).collect();

        let mut probe = model.clone();
        let traces = build_training_batch(&mut probe, &pool, &batch, batch_seed).unwrap();
        let (grads, _) = loss_gradient(&probe, &traces, probe.config().temperature).unwrap();

        let h = 1e-5;
        let analytic = grads.tensors();
        for tensor in 0..5 {
            for i in 0..analytic[tensor].len() {
                let mut plus = model.clone();
                plus.parameters_mut()[tensor][i] += h;
                let mut minus = model.clone();
                minus.parameters_mut()[tensor][i] -= h;
                let numeric =
                    (loss_at(&plus, &pool, &batch, batch_seed) - loss_at(&minus, &pool, &batch, batch_seed))
                        / (2.0 * h);
                let a = analytic[tensor][i];
                let tolerance = 1e-4 * a.abs().max(numeric.abs()) + 1e-8;
                prop_assert!(
                    (a - numeric).abs() <= tolerance,
                    "tensor {tensor} component {i}: analytic {a} vs numeric {numeric}"
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identical_embeddings_give_exactly_log_2n(
        n in 1usize..9,
        raw in prop::collection::vec(-3.0f64..3.0, 2..6),
        temperature in 0.01f64..2.0,
    ) {
        prop_assume!(raw.iter().any(|v| v.abs() > 0.5));
        let v = PatchVector::new(raw);
        let batch = TripletBatch {
            anchors: vec![v.clone(); n],
            positives: vec![v.clone(); n],
            negatives: vec![v.clone(); n],
            anchor_ids: (0..n).map(|i| format!("a{i}")).collect(),
            negative_ids: (0..n).map(|i| format!("n{i}")).collect(),
        };
        let loss = contrastive_loss(&batch, temperature).unwrap();
        let expected = (2.0 * n as f64).ln();
        prop_assert!((loss.mean - expected).abs() < 1e-9, "{} vs {expected}", loss.mean);
    }

    #[test]
    fn inputs_beyond_the_limit_are_tail_truncated(
        seed in any::<u64>(),
        tokens in prop::collection::vec(0u32..12, 17..40),
    ) {
        let model = EmbeddingModel::new(toy_config(12, 4, 5, 3), seed);
        let full = model.embed(&tokens).unwrap();
        let truncated = model.embed(&tokens[..16]).unwrap();
        prop_assert_eq!(full, truncated);
    }

    #[test]
    fn construction_is_seed_deterministic(seed in any::<u64>()) {
        let a = EmbeddingModel::new(toy_config(12, 4, 5, 3), seed);
        let b = EmbeddingModel::new(toy_config(12, 4, 5, 3), seed);
        for (ta, tb) in a.parameters().iter().zip(b.parameters().iter()) {
            prop_assert_eq!(ta, tb);
        }
        let c = EmbeddingModel::new(toy_config(12, 4, 5, 3), seed.wrapping_add(1));
        let differs = a
            .parameters()
            .iter()
            .zip(c.parameters().iter())
            .any(|(x, y)| x != y);
        prop_assert!(differs, "different seeds should initialize differently");
    }
}
