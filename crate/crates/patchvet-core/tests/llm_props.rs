//! Property tests for next-token classification: shift invariance of the
//! normalized score, range laws, and the tie convention.

use proptest::prelude::*;
use patchvet_core::corpus::Label;
use patchvet_core::llm::{
    classify_standard, Completeness, NextTokenDistribution, CANDIDATE_CORRECT, CANDIDATE_WRONG,
};

fn distribution(lp_wrong: f64, lp_correct: f64) -> NextTokenDistribution {
    let mut entries = vec![
        (CANDIDATE_WRONG.to_string(), lp_wrong),
        (CANDIDATE_CORRECT.to_string(), lp_correct),
    ];
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    NextTokenDistribution {
        entries,
        completeness: Completeness::TopK(5),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn scores_are_invariant_under_common_logprob_shifts(
        lp_wrong in -30.0f64..0.0,
        lp_correct in -30.0f64..0.0,
        shift in -500.0f64..500.0,
    ) {
        let base = classify_standard(&distribution(lp_wrong, lp_correct)).unwrap();
        let shifted =
            classify_standard(&distribution(lp_wrong + shift, lp_correct + shift)).unwrap();
        prop_assert!(
            (base.overfitting_score - shifted.overfitting_score).abs() <= 1e-12,
            "score moved from {} to {} under shift {shift}",
            base.overfitting_score,
            shifted.overfitting_score
        );
        prop_assert_eq!(base.label, shifted.label);
    }

    #[test]
    fn scores_are_normalized_and_consistent_with_the_label(
        lp_wrong in -50.0f64..0.0,
        lp_correct in -50.0f64..0.0,
    ) {
        let prediction = classify_standard(&distribution(lp_wrong, lp_correct)).unwrap();
        prop_assert!((0.0..=1.0).contains(&prediction.overfitting_score));
        if prediction.overfitting_score > 0.5 {
            prop_assert_eq!(prediction.label, Label::Overfitting);
        } else {
            prop_assert_eq!(prediction.label, Label::Correct);
        }
        // Swapping the two logprobs mirrors the score around 0.5.
        let mirrored = classify_standard(&distribution(lp_correct, lp_wrong)).unwrap();
        prop_assert!(
            (prediction.overfitting_score + mirrored.overfitting_score - 1.0).abs() <= 1e-12
        );
    }

    #[test]
    fn exact_ties_classify_as_correct(lp in -40.0f64..0.0) {
        let prediction = classify_standard(&distribution(lp, lp)).unwrap();
        prop_assert_eq!(prediction.overfitting_score, 0.5);
        prop_assert_eq!(prediction.label, Label::Correct);
    }
}
