//! Evaluation report: one machine-readable JSON object (per-tool fold rows,
//! aggregates, significance, config echo with seed) plus a delimited-text
//! summary table. Reports carry no timestamps or host details, so reruns
//! with identical inputs produce identical bytes.

use std::path::Path;

use patchvet_core::metrics::{ClassificationMetrics, ConfusionMatrix};
use patchvet_core::retrieval::SkippedRecord;
use patchvet_core::stats::{PMethod, WilcoxonResult};
use serde::Serialize;

use crate::config::RunConfig;

use super::{write_file, FormatError};

/// Metrics for one successfully evaluated fold.
#[derive(Debug, Clone, Serialize)]
pub struct FoldMetrics {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent when the fold's truth contains a single class.
    pub auc: Option<f64>,
}

impl FoldMetrics {
    pub fn new(confusion: ConfusionMatrix, m: ClassificationMetrics, auc: Option<f64>) -> Self {
        FoldMetrics {
            confusion,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            auc,
        }
    }
}

/// One cross-tool fold: the named tool's patches held out as the test set.
#[derive(Debug, Clone, Serialize)]
pub struct FoldReport {
    pub tool: String,
    pub train_size: usize,
    pub test_size: usize,
    /// Training-pool ids removed because their diff matches a test diff.
    pub excluded_ids: Vec<String>,
    /// Training records the index could not embed.
    pub skipped_train: Vec<SkippedRecord>,
    pub metrics: Option<FoldMetrics>,
    /// Set when the fold failed; metrics are then absent.
    pub error: Option<String>,
}

/// Per-metric aggregate over folds (plain or test-size-weighted mean).
#[derive(Debug, Clone, Serialize)]
pub struct AggregateMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean over folds that had an AUC; absent if none did.
    pub auc: Option<f64>,
}

/// Wilcoxon signed-rank comparison against a baseline prediction file.
#[derive(Debug, Clone, Serialize)]
pub struct SignificanceReport {
    pub baseline: String,
    pub statistic: f64,
    pub p_two_sided: f64,
    pub n_nonzero: usize,
    pub method: &'static str,
    /// `p_two_sided < 0.05`.
    pub significant: bool,
}

impl SignificanceReport {
    pub fn new(baseline: String, result: &WilcoxonResult) -> Self {
        SignificanceReport {
            baseline,
            statistic: result.statistic,
            p_two_sided: result.p_two_sided,
            n_nonzero: result.n_nonzero,
            method: match result.method {
                PMethod::Exact => "exact",
                PMethod::NormalApprox => "normal_approx",
            },
            significant: result.p_two_sided < 0.05,
        }
    }
}

/// The complete cross-tool evaluation result.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    /// The effective configuration, echoed verbatim.
    pub config: RunConfig,
    pub folds: Vec<FoldReport>,
    /// Unweighted per-metric mean over successful folds.
    pub average: Option<AggregateMetrics>,
    /// Test-size-weighted per-metric mean over successful folds.
    pub weighted_average: Option<AggregateMetrics>,
    pub significance: Option<SignificanceReport>,
}

pub fn render_report_json(report: &EvaluationReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serialization is total");
    text.push('\n');
    text
}

fn cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    }
}

/// Renders the tab-separated summary table: one row per fold, then the
/// aggregate rows. Failed folds and absent AUCs render as `-`.
pub fn render_summary_table(report: &EvaluationReport) -> String {
    let mut out = String::from("tool\ttest_size\taccuracy\tprecision\trecall\tf1\tauc\n");
    let mut row = |name: &str, size: &str, m: Option<(f64, f64, f64, f64, Option<f64>)>| {
        let cells = match m {
            Some((acc, p, r, f1, auc)) => [
                cell(Some(acc)),
                cell(Some(p)),
                cell(Some(r)),
                cell(Some(f1)),
                cell(auc),
            ],
            None => std::array::from_fn(|_| "-".to_string()),
        };
        out.push_str(&format!("{name}\t{size}\t{}\n", cells.join("\t")));
    };
    for fold in &report.folds {
        row(
            &fold.tool,
            &fold.test_size.to_string(),
            fold.metrics
                .as_ref()
                .map(|m| (m.accuracy, m.precision, m.recall, m.f1, m.auc)),
        );
    }
    for (name, agg) in [
        ("average", &report.average),
        ("weighted_average", &report.weighted_average),
    ] {
        row(
            name,
            "-",
            agg.as_ref()
                .map(|a| (a.accuracy, a.precision, a.recall, a.f1, a.auc)),
        );
    }
    out
}

pub fn save_report(dir: &Path, report: &EvaluationReport) -> Result<(), FormatError> {
    write_file(&dir.join("report.json"), render_report_json(report).as_bytes())?;
    write_file(
        &dir.join("summary.tsv"),
        render_summary_table(report).as_bytes(),
    )
}
