//! Property tests pitting `retrieve` against an independent brute-force
//! oracle: filter by strict similarity threshold, sort by descending
//! similarity with ascending-id ties, truncate to k.

use proptest::prelude::*;
use patchvet_core::corpus::Label;
use patchvet_core::embedder::PatchVector;
use patchvet_core::retrieval::{
    cosine, retrieve, IndexEntry, RetrievalConfig, RetrievalIndex, RetrievedPatch,
};

fn entry(id: usize, values: Vec<f64>) -> IndexEntry {
    IndexEntry {
        patch_id: format!("p{id:03}"),
        vector: PatchVector::new(values),
        label: if id % 2 == 0 { Label::Correct } else { Label::Overfitting },
        tool: format!("tool{}", id % 3),
        bug_id: format!("Bug-{}", id % 5),
    }
}

fn oracle(
    index: &RetrievalIndex,
    query: &PatchVector,
    k: usize,
    beta: f64,
    exclude: Option<&str>,
) -> Vec<RetrievedPatch> {
    let mut hits: Vec<RetrievedPatch> = index
        .entries
        .iter()
        .filter(|e| exclude != Some(e.patch_id.as_str()))
        .map(|e| RetrievedPatch {
            patch_id: e.patch_id.clone(),
            similarity: cosine(query, &e.vector).unwrap(),
            label: e.label,
        })
        .filter(|h| h.similarity > beta)
        .collect();
    hits.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.patch_id.cmp(&b.patch_id))
    });
    hits.truncate(k);
    hits
}

/// Component values from a small grid so exact similarity ties actually
/// occur and exercise the id tie-break.
fn vector_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(-1.0), Just(0.0), Just(0.5), Just(1.0), Just(2.0)], dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn retrieve_matches_the_brute_force_oracle(
        dim in 2usize..6,
        pool in prop::collection::vec(vector_strategy(4), 1..120),
        query in vector_strategy(4),
        k in 0usize..20,
        beta in -1.1f64..1.1,
        exclude_idx in any::<prop::sample::Index>(),
    ) {
        let entries: Vec<IndexEntry> = pool
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut values = v.clone();
                values.truncate(dim.min(values.len()).max(2));
                if values.iter().all(|x| *x == 0.0) {
                    values[0] = 1.0; // zero entries cannot be indexed
                }
                entry(i, values)
            })
            .collect();
        let index = RetrievalIndex { entries, model_fingerprint: "test".into() };
        let mut q = query.clone();
        q.truncate(dim.min(q.len()).max(2));
        if q.iter().all(|x| *x == 0.0) {
            q[0] = 1.0;
        }
        let q = PatchVector::new(q);
        let exclude = Some(index.entries[exclude_idx.index(index.entries.len())].patch_id.clone());
        let config = RetrievalConfig { k, beta };

        let got = retrieve(&index, &q, &config, exclude.as_deref()).unwrap();
        let want = oracle(&index, &q, k, beta, exclude.as_deref());
        prop_assert_eq!(got, want);
    }

    #[test]
    fn results_respect_threshold_order_and_k(
        pool in prop::collection::vec(vector_strategy(3), 1..80),
        k in 1usize..12,
    ) {
        let entries: Vec<IndexEntry> = pool
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut values = v.clone();
                if values.iter().all(|x| *x == 0.0) {
                    values[0] = 1.0;
                }
                entry(i, values)
            })
            .collect();
        let index = RetrievalIndex { entries, model_fingerprint: "test".into() };
        let q = PatchVector::new(vec![1.0, 0.5, -0.25]);
        let config = RetrievalConfig { k, beta: 0.2 };
        let got = retrieve(&index, &q, &config, None).unwrap();

        prop_assert!(got.len() <= k);
        for h in &got {
            prop_assert!(h.similarity > 0.2, "similarity {} not above beta", h.similarity);
        }
        for pair in got.windows(2) {
            let ordered = pair[0].similarity > pair[1].similarity
                || (pair[0].similarity == pair[1].similarity
                    && pair[0].patch_id < pair[1].patch_id);
            prop_assert!(ordered, "{pair:?} out of order");
        }
    }
}
