//! Run configuration: one TOML file describing corpus, backends, chain,
//! and index settings. Command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use lexchain::backend::{BackendDescriptor, BackendKind};
use lexchain::chain::{ChainConfig, ChainDecoding};
use lexchain::chunking::{TokenBudget, TokenCounter};
use lexchain::corpus::LabelSpace;
use lexchain::index::IndexMode;

use crate::CliError;

fn default_seed() -> u64 {
    0
}

fn default_workers() -> usize {
    4
}

fn default_failure_threshold() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub endpoint: String,
    pub context_window: usize,
    #[serde(default)]
    pub embedding_dim: Option<usize>,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
    #[serde(default)]
    pub max_retries: Option<u32>,
    #[serde(default)]
    pub max_in_flight: Option<usize>,
}

impl BackendSection {
    pub fn descriptor(&self, kind: BackendKind) -> BackendDescriptor {
        let mut descriptor = BackendDescriptor::stub(kind, self.context_window);
        descriptor.endpoint = self.endpoint.clone();
        descriptor.embedding_dim = self.embedding_dim;
        if let Some(timeout) = self.timeout_secs {
            descriptor.timeout_secs = timeout;
        }
        if let Some(retries) = self.max_retries {
            descriptor.max_retries = retries;
        }
        if let Some(in_flight) = self.max_in_flight {
            descriptor.max_in_flight = in_flight;
        }
        descriptor
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendsSection {
    #[serde(default)]
    pub summarize: Option<BackendSection>,
    pub embed: BackendSection,
    pub generate: BackendSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummarizeVia {
    /// Dedicated summarization service.
    Service,
    /// The generation backend behind an instruction template.
    Prompted,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecodingSection {
    #[default]
    Greedy,
    SelfConsistency {
        samples: usize,
        temperature: f64,
        /// Defaults to the global seed.
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default = "default_summary_target")]
    pub summary_target: usize,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default)]
    pub token_counter: TokenCounter,
    #[serde(default = "default_dev_sample_size")]
    pub dev_sample_size: usize,
    #[serde(default)]
    pub decoding: DecodingSection,
    #[serde(default = "default_summarize_via")]
    pub summarize_via: SummarizeVia,
}

fn default_k() -> usize {
    ChainConfig::DEFAULT_K
}

fn default_summary_target() -> usize {
    TokenBudget::DEFAULT_SUMMARY_TARGET
}

fn default_max_rounds() -> usize {
    TokenBudget::DEFAULT_MAX_ROUNDS
}

fn default_dev_sample_size() -> usize {
    ChainConfig::DEFAULT_DEV_SAMPLE
}

fn default_summarize_via() -> SummarizeVia {
    SummarizeVia::Service
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            k_neighbors: default_k(),
            summary_target: default_summary_target(),
            max_rounds: default_max_rounds(),
            token_counter: TokenCounter::default(),
            dev_sample_size: default_dev_sample_size(),
            decoding: DecodingSection::default(),
            summarize_via: default_summarize_via(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSection {
    #[serde(default = "default_index_mode")]
    pub mode: String,
    #[serde(default = "default_n_trees")]
    pub n_trees: usize,
    #[serde(default = "default_leaf_size")]
    pub leaf_size: usize,
}

fn default_index_mode() -> String {
    "forest".into()
}

fn default_n_trees() -> usize {
    IndexMode::DEFAULT_N_TREES
}

fn default_leaf_size() -> usize {
    IndexMode::DEFAULT_LEAF_SIZE
}

impl Default for IndexSection {
    fn default() -> Self {
        IndexSection {
            mode: default_index_mode(),
            n_trees: default_n_trees(),
            leaf_size: default_leaf_size(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplatesSection {
    /// Optional plain-text template file; built-ins otherwise.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default = "default_classify_template")]
    pub classify: String,
    #[serde(default = "default_summarize_template")]
    pub summarize: String,
}

impl Default for TemplatesSection {
    fn default() -> Self {
        TemplatesSection {
            file: None,
            classify: default_classify_template(),
            summarize: default_summarize_template(),
        }
    }
}

fn default_classify_template() -> String {
    "classify".into()
}

fn default_summarize_template() -> String {
    "in_summary".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    /// `"binary"`, `"issue_areas"`, or a path to a label-space JSON file.
    pub label_space: String,
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Batch runs exit nonzero above this failure fraction.
    #[serde(default = "default_failure_threshold")]
    pub failure_threshold: f64,
    pub backends: BackendsSection,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub index: IndexSection,
    #[serde(default)]
    pub templates: TemplatesSection,
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    /// `(kind, endpoint)` pairs from `--backend-override`.
    pub backends: Vec<(BackendKind, String)>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;

        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(workers) = overrides.workers {
            config.workers = workers;
        }
        for (kind, endpoint) in &overrides.backends {
            let section = match kind {
                BackendKind::Summarize => config.backends.summarize.as_mut().ok_or_else(|| {
                    CliError::Config(
                        "cannot override the summarize backend: none configured".into(),
                    )
                })?,
                BackendKind::Embed => &mut config.backends.embed,
                BackendKind::Generate => &mut config.backends.generate,
            };
            section.endpoint = endpoint.clone();
        }

        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !self.corpus.exists() {
            return Err(CliError::Config(format!(
                "corpus file {} does not exist",
                self.corpus.display()
            )));
        }
        if self.chain.summarize_via == SummarizeVia::Service
            && self.backends.summarize.is_none()
        {
            return Err(CliError::Config(
                "summarize_via = \"service\" requires a [backends.summarize] section".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.failure_threshold) {
            return Err(CliError::Config(
                "failure_threshold must be within 0..=1".into(),
            ));
        }
        if self.workers == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        match self.index.mode.as_str() {
            "exact" | "forest" => {}
            other => {
                return Err(CliError::Config(format!(
                    "unknown index mode {other:?} (expected \"exact\" or \"forest\")"
                )))
            }
        }
        if let Some(file) = &self.templates.file {
            if !file.exists() {
                return Err(CliError::Config(format!(
                    "template file {} does not exist",
                    file.display()
                )));
            }
        }
        self.token_budget()?;
        self.chain_config()?;
        Ok(())
    }

    pub fn label_space(&self) -> Result<LabelSpace, CliError> {
        match self.label_space.as_str() {
            "binary" => Ok(LabelSpace::binary_violation()),
            "issue_areas" => Ok(LabelSpace::issue_areas()),
            path => LabelSpace::load_json(path)
                .map_err(|e| CliError::Config(format!("label space {path:?}: {e}"))),
        }
    }

    /// Summarization budget: the window comes from whichever backend
    /// performs the summarization.
    pub fn token_budget(&self) -> Result<TokenBudget, CliError> {
        let window = match self.chain.summarize_via {
            SummarizeVia::Service => self
                .backends
                .summarize
                .as_ref()
                .map(|s| s.context_window)
                .unwrap_or(1024),
            SummarizeVia::Prompted => self.backends.generate.context_window,
        };
        TokenBudget::new(window, self.chain.summary_target, self.chain.max_rounds)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn chain_config(&self) -> Result<ChainConfig, CliError> {
        let decoding = match self.chain.decoding {
            DecodingSection::Greedy => ChainDecoding::Greedy,
            DecodingSection::SelfConsistency {
                samples,
                temperature,
                seed,
            } => ChainDecoding::SelfConsistency {
                samples,
                temperature,
                seed: seed.unwrap_or(self.seed),
            },
        };
        let mut config = ChainConfig::new(self.chain.k_neighbors, self.token_budget()?, decoding)
            .map_err(|e| CliError::Config(e.to_string()))?;
        config.dev_sample_size = self.chain.dev_sample_size;
        Ok(config)
    }

    pub fn index_mode(&self) -> IndexMode {
        match self.index.mode.as_str() {
            "exact" => IndexMode::Exact,
            _ => IndexMode::Forest {
                n_trees: self.index.n_trees,
                leaf_size: self.index.leaf_size,
                seed: self.seed,
            },
        }
    }
}

pub fn parse_backend_override(raw: &str) -> Result<(BackendKind, String), String> {
    let (kind, endpoint) = raw
        .split_once('=')
        .ok_or_else(|| format!("expected kind=endpoint, got {raw:?}"))?;
    let kind = match kind.trim() {
        "summarize" => BackendKind::Summarize,
        "embed" => BackendKind::Embed,
        "generate" => BackendKind::Generate,
        other => return Err(format!("unknown backend kind {other:?}")),
    };
    Ok((kind, endpoint.trim().to_string()))
}
