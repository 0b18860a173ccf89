//! Command-line entry point.
//!
//! Subcommands: `train` (tokenizer + embedder checkpoint), `index` (embed
//! the labeled pool), `assess` (score one patch), `evaluate` (cross-tool
//! leave-one-out report), `sweep` (retrieval hyper-parameter surface).
//!
//! On success every command prints one line of JSON to stdout; on failure
//! it prints one line of JSON (`{"kind": …, "error": …}`) to stderr and
//! exits nonzero (2 for configuration problems, 1 otherwise).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use patchvet::bugdir::BugDirError;
use patchvet::config::{self, BackendKind, CliOverrides, ConfigError, RunConfig};
use patchvet::dataset::{load_dataset, load_exclusions, DatasetError};
use patchvet::eval::{render_sweep_table, run_cross_tool, run_sweep, EvalError, PromptDump};
use patchvet::formats::checkpoint::{
    checkpoint_bytes, fingerprint, load_checkpoint, save_checkpoint,
};
use patchvet::formats::index::{load_index, save_index};
use patchvet::formats::predictions::{load_predictions, save_predictions};
use patchvet::formats::report::save_report;
use patchvet::formats::vocab::{load_vocab, save_vocab};
use patchvet::formats::FormatError;
use patchvet::http::HttpBackend;
use patchvet::pipeline::{
    assess_patch, build_index_for, train_embedder, FoldArtifacts, PatchInput, PipelineError,
};
use patchvet_core::corpus::{self, normalize_newlines, Label, PatchRecord};
use patchvet_core::llm::{Backend, LlmError, MockBackend};

#[derive(Debug, thiserror::Error)]
enum MainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error(transparent)]
    BugDir(#[from] BugDirError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl MainError {
    fn kind(&self) -> &'static str {
        match self {
            MainError::Config(_) => "config",
            MainError::Dataset(_) => "dataset",
            MainError::Format(_) => "format",
            MainError::Pipeline(_) => "pipeline",
            MainError::Eval(_) => "eval",
            MainError::Backend(_) => "backend",
            MainError::BugDir(_) => "bug_context",
            MainError::Usage(_) => "usage",
            MainError::Io { .. } => "io",
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            MainError::Config(_) | MainError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "patchvet",
    version,
    about = "Predicts whether program-repair patches are correct or overfitting"
)]
struct Cli {
    #[command(flatten)]
    globals: GlobalFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalFlags {
    /// TOML config file (flags override it).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Patch dataset (JSON-lines).
    #[arg(long, global = true, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// Root directory of per-bug guiding information.
    #[arg(long, global = true, value_name = "DIR")]
    bug_root: Option<PathBuf>,
    /// Next-token backend.
    #[arg(long, global = true, value_parser = parse_backend)]
    backend: Option<BackendKind>,
    /// HTTP backend endpoint URL.
    #[arg(long, global = true, value_name = "URL")]
    endpoint: Option<String>,
    /// Retrieval depth: keep at most k demonstrations.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Retrieval similarity threshold.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Prompt token budget.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Master random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for reports and other outputs.
    #[arg(long, global = true, value_name = "DIR")]
    report_dir: Option<PathBuf>,
    /// Write every assembled prompt under <report-dir>/prompts/.
    #[arg(long, global = true)]
    dump_prompts: bool,
}

fn parse_backend(text: &str) -> Result<BackendKind, String> {
    BackendKind::parse(text).ok_or_else(|| format!("unknown backend {text:?} (mock or http)"))
}

#[derive(Subcommand)]
enum Command {
    /// Train the tokenizer and embedder on the labeled pool.
    Train,
    /// Embed the labeled pool into a retrieval index.
    Index,
    /// Score one patch: by dataset id, or from a diff file.
    Assess(AssessArgs),
    /// Run the full cross-tool leave-one-out evaluation.
    Evaluate {
        /// Baseline prediction file for the significance test.
        #[arg(long, value_name = "FILE")]
        baseline: Option<PathBuf>,
    },
    /// Evaluate the retrieval (beta, k) grid on a 5% tuning split.
    Sweep,
}

#[derive(Args)]
struct AssessArgs {
    /// Assess the dataset record with this id (its own index entry is
    /// ignored during retrieval).
    #[arg(long, conflicts_with = "diff_file")]
    patch_id: Option<String>,
    /// Assess an external unified diff; the patch id is the file stem.
    #[arg(long, value_name = "FILE")]
    diff_file: Option<PathBuf>,
    /// Patched code fragment to show the backend (defaults to the diff
    /// text when assessing an external diff).
    #[arg(long, value_name = "FILE", requires = "diff_file")]
    fragment_file: Option<PathBuf>,
    /// Bug id for guiding information (external diffs only; dataset
    /// records carry their own).
    #[arg(long, requires = "diff_file")]
    bug_id: Option<String>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "kind": e.kind(), "error": e.to_string() })
            );
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<(), MainError> {
    let g = cli.globals;
    let overrides = CliOverrides {
        dataset: g.dataset,
        bug_root: g.bug_root,
        backend: g.backend,
        endpoint: g.endpoint,
        k: g.k,
        beta: g.beta,
        budget: g.budget,
        seed: g.seed,
        report_dir: g.report_dir,
        dump_prompts: g.dump_prompts,
    };
    let cfg = config::load(g.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Index => cmd_index(&cfg),
        Command::Assess(args) => cmd_assess(&cfg, &args),
        Command::Evaluate { baseline } => cmd_evaluate(&cfg, baseline.as_deref()),
        Command::Sweep => cmd_sweep(&cfg),
    }
}

/// Loads the dataset and applies the configured semantic-exclusion list.
/// An empty dataset is a configuration error.
fn load_prepared_records(cfg: &RunConfig) -> Result<Vec<PatchRecord>, MainError> {
    let path = cfg.require_dataset()?;
    let records = load_dataset(path)?;
    if records.is_empty() {
        return Err(ConfigError::EmptyDataset {
            path: path.to_path_buf(),
        }
        .into());
    }
    Ok(records)
}

fn load_exclusion_pairs(cfg: &RunConfig) -> Result<Vec<(String, String)>, MainError> {
    match &cfg.exclusions {
        Some(path) => Ok(load_exclusions(path)?),
        None => Ok(Vec::new()),
    }
}

fn labeled_pool(
    records: Vec<PatchRecord>,
    exclusion_pairs: &[(String, String)],
) -> Result<Vec<PatchRecord>, MainError> {
    let deduped = corpus::dedup_exact(records).kept;
    let records = corpus::apply_semantic_exclusions(deduped, exclusion_pairs)
        .map_err(|e| MainError::Usage(e.to_string()))?;
    Ok(records
        .into_iter()
        .filter(|r| r.label != Label::Unlabeled)
        .collect())
}

fn make_backend(cfg: &RunConfig) -> Result<Box<dyn Backend>, MainError> {
    match cfg.backend {
        BackendKind::Mock => Ok(Box::new(MockBackend::new())),
        BackendKind::Http => {
            let endpoint = cfg
                .endpoint
                .as_deref()
                .ok_or(ConfigError::MissingEndpoint)?;
            Ok(Box::new(HttpBackend::new(
                endpoint,
                cfg.timeout_secs,
                cfg.logprobs,
            )?))
        }
    }
}

fn emit(value: serde_json::Value) {
    println!("{value}");
}

fn cmd_train(cfg: &RunConfig) -> Result<(), MainError> {
    let pairs = load_exclusion_pairs(cfg)?;
    let pool = labeled_pool(load_prepared_records(cfg)?, &pairs)?;
    let (vocab, model) = train_embedder(&pool, cfg, cfg.seed)?;
    save_vocab(&cfg.vocab, &vocab)?;
    save_checkpoint(&cfg.checkpoint, &model, cfg.seed)?;
    emit(serde_json::json!({
        "vocab": cfg.vocab,
        "vocab_size": vocab.size(),
        "checkpoint": cfg.checkpoint,
        "fingerprint": fingerprint(&checkpoint_bytes(&model, cfg.seed)),
        "trained_on": pool.len(),
    }));
    Ok(())
}

fn cmd_index(cfg: &RunConfig) -> Result<(), MainError> {
    let pairs = load_exclusion_pairs(cfg)?;
    let pool = labeled_pool(load_prepared_records(cfg)?, &pairs)?;
    let vocab = load_vocab(&cfg.vocab)?;
    let (model, _seed) = load_checkpoint(&cfg.checkpoint)?;
    let checkpoint_fingerprint = fingerprint(&std::fs::read(&cfg.checkpoint).map_err(
        |source| FormatError::Io {
            path: cfg.checkpoint.clone(),
            source,
        },
    )?);
    let build = build_index_for(&model, &vocab, &pool, &checkpoint_fingerprint)?;
    save_index(&cfg.index, &build.index)?;
    emit(serde_json::json!({
        "index": cfg.index,
        "entries": build.index.entries.len(),
        "skipped": build.skipped.len(),
        "fingerprint": checkpoint_fingerprint,
    }));
    Ok(())
}

/// Loads vocab + checkpoint + index, verifying the index fingerprint.
fn load_artifacts(cfg: &RunConfig) -> Result<FoldArtifacts, MainError> {
    let vocab = load_vocab(&cfg.vocab)?;
    let bytes = std::fs::read(&cfg.checkpoint).map_err(|source| FormatError::Io {
        path: cfg.checkpoint.clone(),
        source,
    })?;
    let (model, _seed) =
        patchvet::formats::checkpoint::checkpoint_from_bytes(&bytes, &cfg.checkpoint)?;
    let checkpoint_fingerprint = fingerprint(&bytes);
    let index = load_index(&cfg.index, &checkpoint_fingerprint)?;
    Ok(FoldArtifacts {
        vocab,
        model,
        index,
        skipped: Vec::new(),
        fingerprint: checkpoint_fingerprint,
    })
}

fn write_prompt_dumps(dir: &Path, prompts: &[PromptDump]) -> Result<(), MainError> {
    let prompts_dir = dir.join("prompts");
    std::fs::create_dir_all(&prompts_dir).map_err(|source| MainError::Io {
        path: prompts_dir.clone(),
        source,
    })?;
    for dump in prompts {
        let write = |path: PathBuf, text: &str| -> Result<(), MainError> {
            std::fs::write(&path, text).map_err(|source| MainError::Io { path, source })
        };
        write(prompts_dir.join(format!("{}.txt", dump.patch_id)), &dump.text)?;
        let mut manifest = dump.manifest.join("\n");
        manifest.push('\n');
        write(
            prompts_dir.join(format!("{}.manifest", dump.patch_id)),
            &manifest,
        )?;
    }
    Ok(())
}

fn cmd_assess(cfg: &RunConfig, args: &AssessArgs) -> Result<(), MainError> {
    let records = load_prepared_records(cfg)?;
    let artifacts = load_artifacts(cfg)?;
    let pool_by_id: BTreeMap<&str, &PatchRecord> = records
        .iter()
        .map(|r| (r.patch_id.as_str(), r))
        .collect();
    let backend = make_backend(cfg)?;

    let external; // owns diff-file inputs for the borrow below
    let (input, bug_root) = match (&args.patch_id, &args.diff_file) {
        (Some(patch_id), None) => {
            let record = records
                .iter()
                .find(|r| &r.patch_id == patch_id)
                .ok_or_else(|| {
                    MainError::Usage(format!("patch {patch_id:?} is not in the dataset"))
                })?;
            (PatchInput::from_record(record), cfg.bug_root.as_deref())
        }
        (None, Some(diff_file)) => {
            let read = |path: &Path| -> Result<String, MainError> {
                std::fs::read_to_string(path)
                    .map(|t| normalize_newlines(&t))
                    .map_err(|source| MainError::Io {
                        path: path.to_path_buf(),
                        source,
                    })
            };
            let diff_text = read(diff_file)?;
            let fragment = match &args.fragment_file {
                Some(path) => read(path)?,
                None => diff_text.clone(),
            };
            let patch_id = diff_file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "external".to_string());
            external = (patch_id, diff_text, fragment);
            let input = PatchInput {
                patch_id: &external.0,
                diff_text: &external.1,
                patched_fragment: &external.2,
                bug_id: args.bug_id.as_deref().unwrap_or(""),
            };
            // Guidance only when the caller identified the bug.
            let bug_root = args
                .bug_id
                .as_deref()
                .and_then(|_| cfg.bug_root.as_deref());
            (input, bug_root)
        }
        _ => {
            return Err(MainError::Usage(
                "assess needs exactly one of --patch-id or --diff-file".to_string(),
            ))
        }
    };

    let outcome = assess_patch(
        &input,
        &artifacts,
        &pool_by_id,
        bug_root,
        cfg,
        backend.as_ref(),
    )?;
    if cfg.dump_prompts {
        write_prompt_dumps(
            &cfg.report_dir,
            &[PromptDump {
                patch_id: outcome.patch_id.clone(),
                text: outcome.prompt.text.clone(),
                manifest: outcome.prompt.manifest_lines(),
            }],
        )?;
    }
    emit(serde_json::json!({
        "patch_id": outcome.patch_id,
        "score": outcome.prediction.overfitting_score,
        "label": outcome.prediction.label.as_str(),
        "manifest": outcome.prompt.manifest_lines(),
    }));
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig, baseline: Option<&Path>) -> Result<(), MainError> {
    let records = load_prepared_records(cfg)?;
    let pairs = load_exclusion_pairs(cfg)?;
    let backend = make_backend(cfg)?;
    let baseline_rows = match baseline {
        Some(path) => Some((path.display().to_string(), load_predictions(path)?)),
        None => None,
    };
    let outcome = run_cross_tool(
        records,
        cfg,
        backend.as_ref(),
        &pairs,
        baseline_rows
            .as_ref()
            .map(|(label, rows)| (label.as_str(), rows.as_slice())),
    )?;
    save_report(&cfg.report_dir, &outcome.report)?;
    save_predictions(&cfg.report_dir.join("predictions.csv"), &outcome.predictions)?;
    if cfg.dump_prompts {
        write_prompt_dumps(&cfg.report_dir, &outcome.prompts)?;
    }
    let successful = outcome
        .report
        .folds
        .iter()
        .filter(|f| f.metrics.is_some())
        .count();
    emit(serde_json::json!({
        "report": cfg.report_dir.join("report.json"),
        "summary": cfg.report_dir.join("summary.tsv"),
        "predictions": cfg.report_dir.join("predictions.csv"),
        "folds": outcome.report.folds.len(),
        "folds_succeeded": successful,
        "average_accuracy": outcome.report.average.as_ref().map(|a| a.accuracy),
    }));
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig) -> Result<(), MainError> {
    let records = load_prepared_records(cfg)?;
    let pairs = load_exclusion_pairs(cfg)?;
    let backend = make_backend(cfg)?;
    let outcome = run_sweep(records, cfg, backend.as_ref(), &pairs)?;
    let table_path = cfg.report_dir.join("sweep.tsv");
    patchvet::formats::write_text(&table_path, &render_sweep_table(&outcome))?;
    let best_auc = outcome
        .cells
        .iter()
        .find(|c| c.beta == outcome.best_beta && c.k == outcome.best_k)
        .and_then(|c| c.auc);
    emit(serde_json::json!({
        "table": table_path,
        "cells": outcome.cells.len(),
        "selected_beta": outcome.best_beta,
        "selected_k": outcome.best_k,
        "selected_auc": best_auc,
        "tuning_size": outcome.tuning_size,
        "train_size": outcome.train_size,
    }));
    Ok(())
}
