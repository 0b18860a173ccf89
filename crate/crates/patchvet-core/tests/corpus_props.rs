//! Property tests for dataset hygiene: exact dedup laws, fold partition
//! invariants, and newline normalization.

use proptest::prelude::*;
use patchvet_core::corpus::{
    all_tools, dedup_exact, make_cross_tool_folds, normalize_newlines, Label, PatchRecord,
};
use std::collections::BTreeSet;

fn record_strategy() -> impl Strategy<Value = PatchRecord> {
    (
        0usize..60,
        0usize..4,
        0usize..5,
        prop_oneof![
            Just(Label::Correct),
            Just(Label::Overfitting),
            Just(Label::Unlabeled)
        ],
        // Diffs from a tiny pool so cross-tool duplicates actually occur.
        0usize..6,
    )
        .prop_map(|(id, tool, bug, label, diff)| PatchRecord {
            patch_id: format!("p{id:02}"),
            tool: format!("tool{tool}"),
            bug_id: format!("Bug-{bug}"),
            diff_text: format!("--- a/F\n+++ b/F\n@@ -1 +1 @@\n-x\n+variant{diff}\n"),
            patched_fragment: format!("variant{diff}"),
            label,
            dataset_tag: "prop".into(),
        })
}

/// Distinct patch ids, arbitrary everything else.
fn records_strategy() -> impl Strategy<Value = Vec<PatchRecord>> {
    prop::collection::vec(record_strategy(), 1..40).prop_map(|mut records| {
        for (i, r) in records.iter_mut().enumerate() {
            r.patch_id = format!("p{i:02}");
        }
        records
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dedup_is_idempotent_and_partitions_the_input(records in records_strategy()) {
        let input_ids: Vec<String> = records.iter().map(|r| r.patch_id.clone()).collect();
        let outcome = dedup_exact(records.clone());

        // kept ∪ removed = input, as a multiset of ids, preserving order.
        let mut seen: Vec<String> = outcome.kept.iter().map(|r| r.patch_id.clone()).collect();
        seen.extend(outcome.removed.iter().map(|d| d.dropped_id.clone()));
        seen.sort();
        let mut expected = input_ids.clone();
        expected.sort();
        prop_assert_eq!(seen, expected);

        // kept preserves first occurrences in input order.
        let kept_ids: Vec<&String> = outcome.kept.iter().map(|r| &r.patch_id).collect();
        let mut positions: Vec<usize> = kept_ids
            .iter()
            .map(|id| input_ids.iter().position(|x| &x == id).unwrap())
            .collect();
        let mut sorted = positions.clone();
        sorted.sort_unstable();
        prop_assert_eq!(&positions, &sorted);
        positions.clear();

        // No two kept records share a normalized diff.
        let diffs: BTreeSet<String> = outcome
            .kept
            .iter()
            .map(|r| normalize_newlines(&r.diff_text))
            .collect();
        prop_assert_eq!(diffs.len(), outcome.kept.len());

        // Every removal points at a kept record with the identical diff.
        for removed in &outcome.removed {
            let kept = outcome.kept.iter().find(|r| r.patch_id == removed.kept_id);
            let dropped = records.iter().find(|r| r.patch_id == removed.dropped_id).unwrap();
            prop_assert!(kept.is_some());
            prop_assert_eq!(
                normalize_newlines(&kept.unwrap().diff_text),
                normalize_newlines(&dropped.diff_text)
            );
        }

        // Idempotence.
        let again = dedup_exact(outcome.kept.clone());
        prop_assert!(again.removed.is_empty());
        prop_assert_eq!(again.kept, outcome.kept);
    }

    #[test]
    fn folds_partition_the_records_for_every_tool(records in records_strategy()) {
        for tool in all_tools(&records) {
            let fold = make_cross_tool_folds(&records, &tool).unwrap();
            prop_assert_eq!(&fold.target_tool, &tool);

            // The three components are pairwise disjoint.
            prop_assert!(fold.test_ids.is_disjoint(&fold.train_ids));
            prop_assert!(fold.test_ids.is_disjoint(&fold.excluded_ids));
            prop_assert!(fold.train_ids.is_disjoint(&fold.excluded_ids));

            // Test = exactly the target tool's records.
            let expected_test: BTreeSet<String> = records
                .iter()
                .filter(|r| r.tool == tool)
                .map(|r| r.patch_id.clone())
                .collect();
            prop_assert_eq!(&fold.test_ids, &expected_test);

            // Train ∪ excluded = every labeled non-target record; membership
            // decided solely by diff identity with some test record.
            let test_diffs: BTreeSet<String> = records
                .iter()
                .filter(|r| r.tool == tool)
                .map(|r| normalize_newlines(&r.diff_text))
                .collect();
            for r in &records {
                if r.tool == tool {
                    continue;
                }
                if r.label == Label::Unlabeled {
                    prop_assert!(!fold.train_ids.contains(&r.patch_id));
                    prop_assert!(!fold.excluded_ids.contains(&r.patch_id));
                } else if test_diffs.contains(&normalize_newlines(&r.diff_text)) {
                    prop_assert!(fold.excluded_ids.contains(&r.patch_id), "{} should be leak-excluded", r.patch_id);
                } else {
                    prop_assert!(fold.train_ids.contains(&r.patch_id), "{} should be trainable", r.patch_id);
                }
            }
        }
    }

    #[test]
    fn mixed_line_endings_canonicalize_to_linefeeds(
        segments in prop::collection::vec("[^\r\n]{0,30}", 1..10),
        crlf_mask in prop::collection::vec(any::<bool>(), 10),
    ) {
        // Join CR-free segments with a random mix of LF and CRLF: the
        // normalized form is the LF join, and it is a fixed point.
        let mut mixed = String::new();
        let mut plain = String::new();
        for (i, segment) in segments.iter().enumerate() {
            if i > 0 {
                mixed.push_str(if crlf_mask[i] { "\r\n" } else { "\n" });
                plain.push('\n');
            }
            mixed.push_str(segment);
            plain.push_str(segment);
        }
        let normalized = normalize_newlines(&mixed);
        prop_assert_eq!(&normalized, &plain);
        prop_assert_eq!(normalize_newlines(&plain), plain);
    }

    #[test]
    fn lone_carriage_returns_are_content_not_line_endings(text in "[^\n]{0,60}") {
        // A CR not followed by LF is data; only the CRLF pair collapses.
        prop_assert_eq!(normalize_newlines(&text), text);
    }
}
