//! Property tests for the byte-pair tokenizer: lossless round-trips, the
//! text persistence format, merge monotonicity, and determinism.

use proptest::prelude::*;
use patchvet_core::bpe::{train_bpe, Vocabulary};

/// Corpus strategy: a handful of documents mixing code-ish ASCII and
/// arbitrary unicode, so multi-byte sequences cross merge boundaries.
fn corpus_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop_oneof![
            "[ a-z+={};()\\n]{0,40}",
            ".{0,20}",
        ],
        1..8,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_round_trips_any_text(corpus in corpus_strategy(), text in ".{0,200}") {
        let vocab = train_bpe(&corpus, 300, 0).unwrap();
        let tokens = vocab.encode(&text);
        prop_assert_eq!(vocab.decode(&tokens).unwrap(), text);
    }

    #[test]
    fn text_format_round_trips_the_vocabulary(corpus in corpus_strategy(), target in 256usize..600) {
        let vocab = train_bpe(&corpus, target, 0).unwrap();
        let reloaded = Vocabulary::from_text(&vocab.to_text()).unwrap();
        prop_assert_eq!(reloaded.merges(), vocab.merges());
        prop_assert_eq!(reloaded.size(), vocab.size());
        // The reloaded tokenizer must segment identically, not just store
        // the same merge list.
        for doc in &corpus {
            prop_assert_eq!(reloaded.encode(doc), vocab.encode(doc));
        }
    }

    #[test]
    fn merges_never_lengthen_a_tokenization(corpus in corpus_strategy(), text in ".{0,200}") {
        let trained = train_bpe(&corpus, 400, 0).unwrap();
        let baseline = Vocabulary::bytes_only().encode(&text).len();
        let encoded = trained.encode(&text).len();
        prop_assert!(encoded <= baseline, "{encoded} tokens vs {baseline} raw bytes");
        prop_assert_eq!(baseline, text.len());
    }

    #[test]
    fn training_ignores_the_seed_and_is_deterministic(corpus in corpus_strategy(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = train_bpe(&corpus, 320, s1).unwrap();
        let b = train_bpe(&corpus, 320, s2).unwrap();
        prop_assert_eq!(a.merges(), b.merges());
    }

    #[test]
    fn every_token_id_is_in_range_and_expands(corpus in corpus_strategy(), text in ".{0,120}") {
        let vocab = train_bpe(&corpus, 350, 0).unwrap();
        let mut rebuilt = Vec::new();
        for id in vocab.encode(&text) {
            prop_assert!((id as usize) < vocab.size());
            rebuilt.extend_from_slice(vocab.expansion(id).unwrap());
        }
        prop_assert_eq!(rebuilt, text.as_bytes());
    }

    #[test]
    fn larger_targets_only_append_merges(corpus in corpus_strategy(), small in 256usize..320, extra in 0usize..80) {
        let a = train_bpe(&corpus, small, 0).unwrap();
        let b = train_bpe(&corpus, small + extra, 0).unwrap();
        prop_assert!(a.merges().len() <= b.merges().len());
        prop_assert_eq!(a.merges(), &b.merges()[..a.merges().len()]);
    }
}
