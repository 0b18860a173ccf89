//! Layered run configuration.
//!
//! Precedence, highest first: command-line flags, `PATCHVET_*` environment
//! variables, a TOML config file, built-in defaults. The resolved
//! [`RunConfig`] is validated before any pipeline step and echoed verbatim
//! into every report. The HTTP auth token is deliberately *not* part of
//! this type: it is read from the `PATCHVET_API_TOKEN` environment
//! variable at backend construction and never appears in flags, files, or
//! reports.

use std::env;
use std::fmt;
use std::path::{Path, PathBuf};

use patchvet_core::guidance::Preambles;
use patchvet_core::prompt::DemoOrder;
use serde::{Deserialize, Serialize};

/// Configuration errors; these exit with status 2 at the CLI.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for {field}: {reason}")]
    Invalid {
        field: &'static str,
        reason: String,
    },
    #[error("environment variable {var} holds unusable value {value:?}")]
    InvalidEnv { var: &'static str, value: String },
    #[error("backend \"http\" requires an endpoint (flag --endpoint, PATCHVET_ENDPOINT, or config key)")]
    MissingEndpoint,
    #[error("this command needs a dataset (flag --dataset, PATCHVET_DATASET, or config key)")]
    MissingDataset,
    #[error("dataset {path} contains no records")]
    EmptyDataset { path: PathBuf },
}

/// Which next-token backend to query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

impl BackendKind {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "mock" => Some(BackendKind::Mock),
            "http" => Some(BackendKind::Http),
            _ => None,
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendKind::Mock => write!(f, "mock"),
            BackendKind::Http => write!(f, "http"),
        }
    }
}

/// Demonstration placement, as a config value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoOrderSetting {
    MostSimilarFirst,
    LeastSimilarFirst,
}

impl DemoOrderSetting {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "most_similar_first" => Some(DemoOrderSetting::MostSimilarFirst),
            "least_similar_first" => Some(DemoOrderSetting::LeastSimilarFirst),
            _ => None,
        }
    }

    pub fn as_demo_order(self) -> DemoOrder {
        match self {
            DemoOrderSetting::MostSimilarFirst => DemoOrder::MostSimilarFirst,
            DemoOrderSetting::LeastSimilarFirst => DemoOrder::LeastSimilarFirst,
        }
    }
}

/// The fully resolved, validated run configuration. Paths are kept exactly
/// as supplied (no canonicalization) so reports echo what the user wrote.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    // Inputs.
    pub dataset: Option<PathBuf>,
    pub bug_root: Option<PathBuf>,
    pub exclusions: Option<PathBuf>,
    // Artifacts.
    pub vocab: PathBuf,
    pub checkpoint: PathBuf,
    pub index: PathBuf,
    pub report_dir: PathBuf,
    // Retrieval.
    pub k: usize,
    pub beta: f64,
    // Prompting.
    pub budget: usize,
    pub demo_order: DemoOrderSetting,
    pub preambles: Preambles,
    pub dump_prompts: bool,
    // Backend.
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    pub timeout_secs: u64,
    pub logprobs: usize,
    pub parallelism: usize,
    // Seeds and training.
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub vocab_target: usize,
    // Encoder shape.
    pub d_emb: usize,
    pub d_hid: usize,
    pub d_out: usize,
    pub dropout_rate: f64,
    pub temperature: f64,
    pub max_input_tokens: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            bug_root: None,
            exclusions: None,
            vocab: PathBuf::from("artifacts/vocab.bpe"),
            checkpoint: PathBuf::from("artifacts/embedder.pjemb"),
            index: PathBuf::from("artifacts/patches.pjidx"),
            report_dir: PathBuf::from("reports"),
            k: 10,
            beta: 0.9,
            budget: 8192,
            demo_order: DemoOrderSetting::MostSimilarFirst,
            preambles: Preambles::default(),
            dump_prompts: false,
            backend: BackendKind::Mock,
            endpoint: None,
            timeout_secs: 30,
            logprobs: 5,
            parallelism: 4,
            seed: 42,
            learning_rate: 5e-5,
            batch_size: 64,
            epochs: 3,
            vocab_target: 512,
            d_emb: 64,
            d_hid: 128,
            d_out: 64,
            dropout_rate: 0.1,
            temperature: 0.05,
            max_input_tokens: 512,
        }
    }
}

/// Values taken from command-line flags; `None` means "flag not given".
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub dataset: Option<PathBuf>,
    pub bug_root: Option<PathBuf>,
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub k: Option<usize>,
    pub beta: Option<f64>,
    pub budget: Option<usize>,
    pub seed: Option<u64>,
    pub report_dir: Option<PathBuf>,
    pub dump_prompts: bool,
}

/// The config-file schema: every key optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    dataset: Option<PathBuf>,
    bug_root: Option<PathBuf>,
    exclusions: Option<PathBuf>,
    vocab: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    index: Option<PathBuf>,
    report_dir: Option<PathBuf>,
    k: Option<usize>,
    beta: Option<f64>,
    budget: Option<usize>,
    demo_order: Option<DemoOrderSetting>,
    preambles: Option<FilePreambles>,
    dump_prompts: Option<bool>,
    backend: Option<BackendKind>,
    endpoint: Option<String>,
    timeout_secs: Option<u64>,
    logprobs: Option<usize>,
    parallelism: Option<usize>,
    seed: Option<u64>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    epochs: Option<usize>,
    vocab_target: Option<usize>,
    d_emb: Option<usize>,
    d_hid: Option<usize>,
    d_out: Option<usize>,
    dropout_rate: Option<f64>,
    temperature: Option<f64>,
    max_input_tokens: Option<usize>,
}

/// Per-preamble overrides; omitted keys keep the default wording.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePreambles {
    bug: Option<String>,
    trace: Option<String>,
    case: Option<String>,
    coverage: Option<String>,
}

fn env_string(var: &'static str) -> Option<String> {
    env::var(var).ok().filter(|v| !v.is_empty())
}

fn env_parse<T: std::str::FromStr>(var: &'static str) -> Result<Option<T>, ConfigError> {
    match env_string(var) {
        None => Ok(None),
        Some(value) => value
            .parse()
            .map(Some)
            .map_err(|_| ConfigError::InvalidEnv { var, value }),
    }
}

/// Resolves the configuration: defaults, then the config file (if any),
/// then environment variables, then flags; validates the result.
pub fn load(config_path: Option<&Path>, cli: &CliOverrides) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();

    if let Some(path) = config_path {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: FileConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        apply_file(&mut cfg, file);
    }

    apply_env(&mut cfg)?;
    apply_cli(&mut cfg, cli);
    validate(&cfg)?;
    Ok(cfg)
}

fn apply_file(cfg: &mut RunConfig, file: FileConfig) {
    macro_rules! take {
        ($field:ident) => {
            if let Some(value) = file.$field {
                cfg.$field = value;
            }
        };
    }
    cfg.dataset = file.dataset.or(cfg.dataset.take());
    cfg.bug_root = file.bug_root.or(cfg.bug_root.take());
    cfg.exclusions = file.exclusions.or(cfg.exclusions.take());
    cfg.endpoint = file.endpoint.or(cfg.endpoint.take());
    take!(vocab);
    take!(checkpoint);
    take!(index);
    take!(report_dir);
    take!(k);
    take!(beta);
    take!(budget);
    take!(demo_order);
    take!(dump_prompts);
    take!(backend);
    take!(timeout_secs);
    take!(logprobs);
    take!(parallelism);
    take!(seed);
    take!(learning_rate);
    take!(batch_size);
    take!(epochs);
    take!(vocab_target);
    take!(d_emb);
    take!(d_hid);
    take!(d_out);
    take!(dropout_rate);
    take!(temperature);
    take!(max_input_tokens);
    if let Some(p) = file.preambles {
        if let Some(bug) = p.bug {
            cfg.preambles.bug = bug;
        }
        if let Some(trace) = p.trace {
            cfg.preambles.trace = trace;
        }
        if let Some(case) = p.case {
            cfg.preambles.case = case;
        }
        if let Some(coverage) = p.coverage {
            cfg.preambles.coverage = coverage;
        }
    }
}

fn apply_env(cfg: &mut RunConfig) -> Result<(), ConfigError> {
    if let Some(v) = env_string("PATCHVET_DATASET") {
        cfg.dataset = Some(PathBuf::from(v));
    }
    if let Some(v) = env_string("PATCHVET_BUG_ROOT") {
        cfg.bug_root = Some(PathBuf::from(v));
    }
    if let Some(v) = env_string("PATCHVET_BACKEND") {
        cfg.backend = BackendKind::parse(&v).ok_or(ConfigError::InvalidEnv {
            var: "PATCHVET_BACKEND",
            value: v,
        })?;
    }
    if let Some(v) = env_string("PATCHVET_ENDPOINT") {
        cfg.endpoint = Some(v);
    }
    if let Some(v) = env_parse::<usize>("PATCHVET_K")? {
        cfg.k = v;
    }
    if let Some(v) = env_parse::<f64>("PATCHVET_BETA")? {
        cfg.beta = v;
    }
    if let Some(v) = env_parse::<usize>("PATCHVET_BUDGET")? {
        cfg.budget = v;
    }
    if let Some(v) = env_parse::<u64>("PATCHVET_SEED")? {
        cfg.seed = v;
    }
    if let Some(v) = env_string("PATCHVET_REPORT_DIR") {
        cfg.report_dir = PathBuf::from(v);
    }
    Ok(())
}

fn apply_cli(cfg: &mut RunConfig, cli: &CliOverrides) {
    if let Some(v) = &cli.dataset {
        cfg.dataset = Some(v.clone());
    }
    if let Some(v) = &cli.bug_root {
        cfg.bug_root = Some(v.clone());
    }
    if let Some(v) = cli.backend {
        cfg.backend = v;
    }
    if let Some(v) = &cli.endpoint {
        cfg.endpoint = Some(v.clone());
    }
    if let Some(v) = cli.k {
        cfg.k = v;
    }
    if let Some(v) = cli.beta {
        cfg.beta = v;
    }
    if let Some(v) = cli.budget {
        cfg.budget = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = &cli.report_dir {
        cfg.report_dir = v.clone();
    }
    if cli.dump_prompts {
        cfg.dump_prompts = true;
    }
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            field,
            reason: reason.into(),
        }
    }
    if cfg.k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    // Cosine similarity is signed; beta = -1 admits every candidate.
    if !cfg.beta.is_finite() || !(-1.0..=1.0).contains(&cfg.beta) {
        return Err(invalid("beta", "must lie in [-1, 1]"));
    }
    if cfg.budget == 0 {
        return Err(invalid("budget", "must be at least 1"));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(invalid("learning_rate", "must be positive"));
    }
    if cfg.batch_size < 2 {
        return Err(invalid("batch_size", "must be at least 2"));
    }
    if cfg.vocab_target < 256 {
        return Err(invalid("vocab_target", "must be at least 256"));
    }
    if cfg.d_emb == 0 || cfg.d_hid == 0 || cfg.d_out == 0 {
        return Err(invalid("d_emb/d_hid/d_out", "dimensions must be positive"));
    }
    if !cfg.dropout_rate.is_finite() || !(0.0..1.0).contains(&cfg.dropout_rate) {
        return Err(invalid("dropout_rate", "must lie in [0, 1)"));
    }
    if !(cfg.temperature.is_finite() && cfg.temperature > 0.0) {
        return Err(invalid("temperature", "must be positive"));
    }
    if cfg.max_input_tokens == 0 {
        return Err(invalid("max_input_tokens", "must be at least 1"));
    }
    if cfg.timeout_secs == 0 {
        return Err(invalid("timeout_secs", "must be at least 1"));
    }
    if cfg.logprobs < 2 {
        return Err(invalid(
            "logprobs",
            "must be at least 2 to cover both candidate tokens",
        ));
    }
    if cfg.parallelism == 0 {
        return Err(invalid("parallelism", "must be at least 1"));
    }
    if cfg.backend == BackendKind::Http && cfg.endpoint.is_none() {
        return Err(ConfigError::MissingEndpoint);
    }
    Ok(())
}

impl RunConfig {
    /// The dataset path, or the error every dataset-requiring command
    /// reports.
    pub fn require_dataset(&self) -> Result<&Path, ConfigError> {
        self.dataset.as_deref().ok_or(ConfigError::MissingDataset)
    }
}
