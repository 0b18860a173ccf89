//! Cross-tool leave-one-out evaluation and the retrieval hyper-parameter
//! sweep.
//!
//! Evaluation holds out one APR tool at a time: its patches form the test
//! set, every labeled patch from the other tools forms the training pool
//! (minus leak-filtered diffs), and a fresh tokenizer/embedder/index is
//! trained per fold. A failing fold is reported in its row, not fatal to
//! the run.
//!
//! Evaluation deliberately does not deduplicate across tools: a training
//! patch byte-identical to a test patch is exactly the leak the per-fold
//! exclusion rule exists to catch and record. Exact deduplication belongs
//! to dataset preparation (and to the sweep, whose tuning split has no
//! fold machinery to protect it).

use std::collections::BTreeMap;

use patchvet_core::corpus::{
    all_tools, apply_semantic_exclusions, dedup_exact, make_cross_tool_folds, CorpusError, Label,
    PatchRecord,
};
use patchvet_core::embedder::derive_seed;
use patchvet_core::llm::Backend;
use patchvet_core::metrics::{auc, confusion, metrics_from, MetricsError};
use patchvet_core::rand_chacha::rand_core::{RngCore, SeedableRng};
use patchvet_core::rand_chacha::ChaCha20Rng;
use patchvet_core::stats::{wilcoxon_signed_rank, StatsError};

use crate::config::RunConfig;
use crate::formats::predictions::PredictionRow;
use crate::formats::report::{
    AggregateMetrics, EvaluationReport, FoldMetrics, FoldReport, SignificanceReport,
};
use crate::pipeline::{assess_patch, build_fold_artifacts, PatchInput};

/// Errors that abort an evaluation run (per-fold failures do not).
#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("dataset error: {0}")]
    Corpus(#[from] CorpusError),
    #[error("metrics error: {0}")]
    Metrics(#[from] MetricsError),
    #[error("significance test failed: {0}")]
    Stats(#[from] StatsError),
    #[error("baseline predictions are missing patch {0:?}")]
    BaselineMissing(String),
    /// Sweeps have no per-fold error rows, so pipeline failures abort.
    #[error("sweep failed: {0}")]
    Sweep(#[from] crate::pipeline::PipelineError),
}

/// One assembled prompt kept for auditing.
pub struct PromptDump {
    pub patch_id: String,
    pub text: String,
    pub manifest: Vec<String>,
}

/// Everything an evaluation run produces.
pub struct EvalOutcome {
    pub report: EvaluationReport,
    /// One row per successfully assessed patch, fold by fold.
    pub predictions: Vec<PredictionRow>,
    pub prompts: Vec<PromptDump>,
}

/// FNV-1a over UTF-8 bytes; stable tool-name hash for per-fold seeds.
fn fnv1a64(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in text.as_bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Pool preparation for the sweep: exact dedup plus semantic exclusions.
/// The tuning split has no fold-level leak rule, so byte-identical diffs
/// must not straddle the tuning/train boundary.
fn sweep_pool(
    records: Vec<PatchRecord>,
    exclusion_pairs: &[(String, String)],
) -> Result<Vec<PatchRecord>, EvalError> {
    let outcome = dedup_exact(records);
    for removed in &outcome.removed {
        log::info!(
            "dropped exact duplicate {:?} (kept {:?})",
            removed.dropped_id,
            removed.kept_id
        );
    }
    Ok(apply_semantic_exclusions(outcome.kept, exclusion_pairs)?)
}

struct FoldRun {
    report: FoldReport,
    predictions: Vec<PredictionRow>,
    prompts: Vec<PromptDump>,
    /// Labeled truths for the assessed patches, aligned with `predictions`.
    truths: Vec<Label>,
}

fn run_fold(
    records: &[PatchRecord],
    tool: &str,
    cfg: &RunConfig,
    backend: &dyn Backend,
) -> Result<FoldRun, EvalError> {
    let fold = make_cross_tool_folds(records, tool)?;
    let train_pool: Vec<PatchRecord> = records
        .iter()
        .filter(|r| fold.train_ids.contains(&r.patch_id))
        .cloned()
        .collect();
    let mut test_records: Vec<&PatchRecord> = records
        .iter()
        .filter(|r| fold.test_ids.contains(&r.patch_id))
        .collect();
    test_records.sort_by(|a, b| a.patch_id.cmp(&b.patch_id));

    let mut report = FoldReport {
        tool: tool.to_string(),
        train_size: train_pool.len(),
        test_size: test_records.len(),
        excluded_ids: fold.excluded_ids.iter().cloned().collect(),
        skipped_train: Vec::new(),
        metrics: None,
        error: None,
    };
    let run = |report: &mut FoldReport| -> Result<FoldRun, String> {
        let fold_seed = derive_seed(cfg.seed, fnv1a64(tool), 0);
        let artifacts =
            build_fold_artifacts(&train_pool, cfg, fold_seed).map_err(|e| e.to_string())?;
        report.skipped_train = artifacts.skipped.clone();
        let pool_by_id: BTreeMap<&str, &PatchRecord> = train_pool
            .iter()
            .map(|r| (r.patch_id.as_str(), r))
            .collect();

        let mut predictions = Vec::with_capacity(test_records.len());
        let mut prompts = Vec::with_capacity(test_records.len());
        let mut truths = Vec::with_capacity(test_records.len());
        let mut scores = Vec::with_capacity(test_records.len());
        let mut predicted_labels = Vec::with_capacity(test_records.len());
        for record in &test_records {
            if record.label == Label::Unlabeled {
                return Err(format!(
                    "test record {:?} is unlabeled; cannot score this fold",
                    record.patch_id
                ));
            }
            let outcome = assess_patch(
                &PatchInput::from_record(record),
                &artifacts,
                &pool_by_id,
                cfg.bug_root.as_deref(),
                cfg,
                backend,
            )
            .map_err(|e| format!("patch {:?}: {e}", record.patch_id))?;
            truths.push(record.label);
            scores.push(outcome.prediction.overfitting_score);
            predicted_labels.push(outcome.prediction.label);
            predictions.push(PredictionRow {
                patch_id: record.patch_id.clone(),
                score: outcome.prediction.overfitting_score,
                label: outcome.prediction.label,
            });
            prompts.push(PromptDump {
                patch_id: record.patch_id.clone(),
                manifest: outcome.prompt.manifest_lines(),
                text: outcome.prompt.text,
            });
        }

        let cm = confusion(&truths, &predicted_labels).map_err(|e| e.to_string())?;
        let m = metrics_from(&cm).map_err(|e| e.to_string())?;
        let fold_auc = auc(&scores, &truths).map_err(|e| e.to_string())?;
        Ok(FoldRun {
            report: FoldReport {
                metrics: Some(FoldMetrics::new(cm, m, fold_auc)),
                ..report.clone()
            },
            predictions,
            prompts,
            truths,
        })
    };
    match run(&mut report) {
        Ok(fold_run) => Ok(fold_run),
        Err(message) => {
            log::warn!("fold {tool}: {message}");
            report.error = Some(message);
            Ok(FoldRun {
                report,
                predictions: Vec::new(),
                prompts: Vec::new(),
                truths: Vec::new(),
            })
        }
    }
}

fn aggregate(folds: &[FoldReport], weighted: bool) -> Option<AggregateMetrics> {
    let rows: Vec<(&FoldMetrics, f64)> = folds
        .iter()
        .filter_map(|f| f.metrics.as_ref().map(|m| (m, f.test_size as f64)))
        .collect();
    if rows.is_empty() {
        return None;
    }
    let mean = |pick: &dyn Fn(&FoldMetrics) -> f64| -> f64 {
        let mut total = 0.0;
        let mut weight_total = 0.0;
        for (m, size) in &rows {
            let w = if weighted { *size } else { 1.0 };
            total += w * pick(m);
            weight_total += w;
        }
        total / weight_total
    };
    let auc_rows: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|(m, size)| m.auc.map(|a| (a, *size)))
        .collect();
    let auc = if auc_rows.is_empty() {
        None
    } else {
        let mut total = 0.0;
        let mut weight_total = 0.0;
        for (a, size) in &auc_rows {
            let w = if weighted { *size } else { 1.0 };
            total += w * a;
            weight_total += w;
        }
        Some(total / weight_total)
    };
    Some(AggregateMetrics {
        accuracy: mean(&|m| m.accuracy),
        precision: mean(&|m| m.precision),
        recall: mean(&|m| m.recall),
        f1: mean(&|m| m.f1),
        auc,
    })
}

/// Per-fold paired accuracies (ours, baseline) for the significance test.
fn significance_pairs(
    runs: &[FoldRun],
    baseline: &[PredictionRow],
) -> Result<Vec<(f64, f64)>, EvalError> {
    let baseline_by_id: BTreeMap<&str, Label> = baseline
        .iter()
        .map(|row| (row.patch_id.as_str(), row.label))
        .collect();
    let mut pairs = Vec::new();
    for run in runs {
        let Some(metrics) = &run.report.metrics else {
            continue;
        };
        let mut baseline_hits = 0usize;
        for (prediction, truth) in run.predictions.iter().zip(&run.truths) {
            let baseline_label = baseline_by_id
                .get(prediction.patch_id.as_str())
                .ok_or_else(|| EvalError::BaselineMissing(prediction.patch_id.clone()))?;
            if baseline_label == truth {
                baseline_hits += 1;
            }
        }
        let baseline_accuracy = baseline_hits as f64 / run.predictions.len() as f64;
        pairs.push((metrics.accuracy, baseline_accuracy));
    }
    Ok(pairs)
}

/// Runs the full leave-one-tool-out evaluation.
///
/// `baseline` is an optional `(path_label, rows)` pair of predictions from
/// another technique over the same patches; when present, per-fold paired
/// accuracies feed a Wilcoxon signed-rank test.
pub fn run_cross_tool(
    records: Vec<PatchRecord>,
    cfg: &RunConfig,
    backend: &dyn Backend,
    exclusion_pairs: &[(String, String)],
    baseline: Option<(&str, &[PredictionRow])>,
) -> Result<EvalOutcome, EvalError> {
    let records = apply_semantic_exclusions(records, exclusion_pairs)?;
    let mut runs = Vec::new();
    for tool in all_tools(&records) {
        runs.push(run_fold(&records, &tool, cfg, backend)?);
    }

    let folds: Vec<FoldReport> = runs.iter().map(|r| r.report.clone()).collect();
    let significance = match baseline {
        Some((label, rows)) => {
            let pairs = significance_pairs(&runs, rows)?;
            let result = wilcoxon_signed_rank(&pairs)?;
            Some(SignificanceReport::new(label.to_string(), &result))
        }
        None => None,
    };
    let report = EvaluationReport {
        config: cfg.clone(),
        average: aggregate(&folds, false),
        weighted_average: aggregate(&folds, true),
        folds,
        significance,
    };
    let mut predictions = Vec::new();
    let mut prompts = Vec::new();
    for run in runs {
        predictions.extend(run.predictions);
        prompts.extend(run.prompts);
    }
    Ok(EvalOutcome {
        report,
        predictions,
        prompts,
    })
}

/// The published sweep grids.
pub const SWEEP_BETAS: [f64; 7] = [0.80, 0.82, 0.85, 0.87, 0.90, 0.92, 0.95];
pub const SWEEP_KS: [usize; 8] = [2, 4, 6, 8, 10, 12, 14, 15];

/// One sweep grid cell.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub beta: f64,
    pub k: usize,
    pub auc: Option<f64>,
    pub n_eval: usize,
}

/// The AUC surface and the selected operating point.
pub struct SweepOutcome {
    pub cells: Vec<SweepCell>,
    pub best_beta: f64,
    pub best_k: usize,
    pub tuning_size: usize,
    pub train_size: usize,
}

/// Hand-rolled Fisher–Yates drawing 64-bit values, so the shuffle is
/// pinned to this implementation rather than a library's index sampler.
fn shuffle<T>(items: &mut [T], rng: &mut ChaCha20Rng) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// Splits ~5% of the labeled pool for tuning, stratified by label: each
/// class contributes `ceil(5%)` of its members (at least one), drawn by
/// seeded shuffle of the sorted id list.
fn tuning_split(records: &[PatchRecord], seed: u64) -> Vec<String> {
    let mut tuning = Vec::new();
    for (class_index, class) in [Label::Correct, Label::Overfitting].iter().enumerate() {
        let mut ids: Vec<&str> = records
            .iter()
            .filter(|r| r.label == *class)
            .map(|r| r.patch_id.as_str())
            .collect();
        if ids.is_empty() {
            continue;
        }
        ids.sort_unstable();
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(
            seed,
            fnv1a64("tuning-split"),
            class_index as u64,
        ));
        shuffle(&mut ids, &mut rng);
        let take = (ids.len() as f64 * 0.05).ceil().max(1.0) as usize;
        tuning.extend(ids[..take].iter().map(|s| s.to_string()));
    }
    tuning.sort();
    tuning
}

/// Evaluates the retrieval grid (β × k) on a 5% tuning split.
///
/// One tokenizer/embedder/index is trained on the non-tuning labeled pool
/// and shared by every cell; cells differ only in query parameters, so
/// this equals running each cell independently. Selection is argmax AUC,
/// ties broken toward smaller k, then larger β; cells without an AUC
/// (single-class tuning split) never win over cells with one.
pub fn run_sweep(
    records: Vec<PatchRecord>,
    cfg: &RunConfig,
    backend: &dyn Backend,
    exclusion_pairs: &[(String, String)],
) -> Result<SweepOutcome, EvalError> {
    let records = sweep_pool(records, exclusion_pairs)?;
    let labeled: Vec<PatchRecord> = records
        .into_iter()
        .filter(|r| r.label != Label::Unlabeled)
        .collect();
    let tuning_ids = tuning_split(&labeled, cfg.seed);
    let is_tuning = |id: &str| tuning_ids.binary_search_by(|t| t.as_str().cmp(id)).is_ok();
    let train_pool: Vec<PatchRecord> = labeled
        .iter()
        .filter(|r| !is_tuning(&r.patch_id))
        .cloned()
        .collect();
    let tuning_records: Vec<&PatchRecord> = labeled
        .iter()
        .filter(|r| is_tuning(&r.patch_id))
        .collect();

    let model_seed = derive_seed(cfg.seed, fnv1a64("sweep-model"), 0);
    let artifacts = build_fold_artifacts(&train_pool, cfg, model_seed)?;
    let pool_by_id: BTreeMap<&str, &PatchRecord> = train_pool
        .iter()
        .map(|r| (r.patch_id.as_str(), r))
        .collect();

    let mut cells = Vec::with_capacity(SWEEP_BETAS.len() * SWEEP_KS.len());
    for &beta in &SWEEP_BETAS {
        for &k in &SWEEP_KS {
            let cell_cfg = RunConfig {
                beta,
                k,
                ..cfg.clone()
            };
            let mut scores = Vec::with_capacity(tuning_records.len());
            let mut truths = Vec::with_capacity(tuning_records.len());
            for record in &tuning_records {
                let outcome = assess_patch(
                    &PatchInput::from_record(record),
                    &artifacts,
                    &pool_by_id,
                    cfg.bug_root.as_deref(),
                    &cell_cfg,
                    backend,
                )?;
                scores.push(outcome.prediction.overfitting_score);
                truths.push(record.label);
            }
            let cell_auc = auc(&scores, &truths)?;
            cells.push(SweepCell {
                beta,
                k,
                auc: cell_auc,
                n_eval: tuning_records.len(),
            });
        }
    }

    let mut best: Option<&SweepCell> = None;
    for cell in &cells {
        let better = match best {
            None => true,
            Some(current) => {
                let a = cell.auc.unwrap_or(f64::NEG_INFINITY);
                let b = current.auc.unwrap_or(f64::NEG_INFINITY);
                a > b
                    || (a == b
                        && (cell.k < current.k || (cell.k == current.k && cell.beta > current.beta)))
            }
        };
        if better {
            best = Some(cell);
        }
    }
    let best = best.expect("grid is never empty");
    Ok(SweepOutcome {
        best_beta: best.beta,
        best_k: best.k,
        tuning_size: tuning_records.len(),
        train_size: train_pool.len(),
        cells,
    })
}

/// Renders the sweep surface as a tab-separated table.
pub fn render_sweep_table(outcome: &SweepOutcome) -> String {
    let mut out = String::from("beta\tk\tauc\tn_eval\n");
    for cell in &outcome.cells {
        let auc_cell = match cell.auc {
            Some(a) => format!("{a:.4}"),
            None => "-".to_string(),
        };
        out.push_str(&format!(
            "{:.2}\t{}\t{}\t{}\n",
            cell.beta, cell.k, auc_cell, cell.n_eval
        ));
    }
    out
}
