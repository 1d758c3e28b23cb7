//! Subcommand implementations sharing one loaded run context.

pub mod baseline;
pub mod classify;
pub mod eval;
pub mod index;
pub mod pipeline;
pub mod summarize;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use lexchain::backend::{
    BackendClient, BackendKind, EmbedBackend, GenerateBackend, PromptedSummarizer,
    SummarizeBackend,
};
use lexchain::chain::{Backends, StageCache};
use lexchain::corpus::{Corpus, Split};
use lexchain::prompting::{PromptTemplate, TemplateSet};

use crate::config::{RunConfig, SummarizeVia};
use crate::CliError;

/// Config plus everything loaded from it that commands share.
pub struct RunContext {
    pub config: RunConfig,
    pub corpus: Corpus,
    pub cache: StageCache,
    pub templates: TemplateSet,
}

impl RunContext {
    /// Validates paths, loads corpus and templates, and prepares the
    /// output directory. All failures here are configuration errors.
    pub fn new(config: RunConfig) -> Result<Self, CliError> {
        let space = config.label_space()?;
        let corpus = Corpus::load_jsonl(&config.corpus, space)
            .map_err(|e| CliError::Config(format!("corpus {}: {e}", config.corpus.display())))?;
        std::fs::create_dir_all(&config.output_dir).map_err(|e| {
            CliError::Config(format!(
                "cannot create output dir {}: {e}",
                config.output_dir.display()
            ))
        })?;
        let cache = StageCache::new(config.output_dir.join("cache"))
            .map_err(|e| CliError::Config(format!("cannot create cache dir: {e}")))?;
        let templates = match &config.templates.file {
            Some(path) => TemplateSet::from_file(path)
                .map_err(|e| CliError::Config(format!("templates {}: {e}", path.display())))?,
            None => TemplateSet::defaults(),
        };
        Ok(RunContext {
            config,
            corpus,
            cache,
            templates,
        })
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    pub fn summaries_path(&self, split: Split) -> PathBuf {
        self.out(&format!("summaries_{split}.jsonl"))
    }

    pub fn vectors_path(&self) -> PathBuf {
        self.out("vectors_train.jsonl")
    }

    pub fn index_path(&self) -> PathBuf {
        self.out("index.bin")
    }

    pub fn predictions_path(&self, split: Split) -> PathBuf {
        self.out(&format!("predictions_{split}.jsonl"))
    }

    pub fn classify_template(&self) -> Result<&PromptTemplate, CliError> {
        self.templates
            .get(&self.config.templates.classify)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    fn client(&self, kind: BackendKind) -> Result<BackendClient, CliError> {
        let section = match kind {
            BackendKind::Summarize => self.config.backends.summarize.as_ref().ok_or_else(|| {
                CliError::Config("no [backends.summarize] section configured".into())
            })?,
            BackendKind::Embed => &self.config.backends.embed,
            BackendKind::Generate => &self.config.backends.generate,
        };
        BackendClient::from_descriptor(&section.descriptor(kind))
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// The summarization handle: either the summarize service or the
    /// generation backend behind the configured instruction template.
    pub fn summarizer(&self) -> Result<(Arc<dyn SummarizeBackend>, String), CliError> {
        match self.config.chain.summarize_via {
            SummarizeVia::Service => {
                let client = self.client(BackendKind::Summarize)?;
                let id = client.descriptor().fingerprint();
                Ok((Arc::new(client), id))
            }
            SummarizeVia::Prompted => {
                let client = self.client(BackendKind::Generate)?;
                let id = format!(
                    "prompted:{}:{}",
                    self.config.templates.summarize,
                    client.descriptor().fingerprint()
                );
                let template = self
                    .templates
                    .get(&self.config.templates.summarize)
                    .map_err(|e| CliError::Config(e.to_string()))?
                    .clone();
                let generator: Arc<dyn GenerateBackend> = Arc::new(client);
                let summarizer =
                    PromptedSummarizer::new(generator, template, self.config.chain.summary_target)
                        .map_err(|e| CliError::Config(e.to_string()))?;
                Ok((Arc::new(summarizer), id))
            }
        }
    }

    pub fn embedder(&self) -> Result<(Arc<dyn EmbedBackend>, String), CliError> {
        let client = self.client(BackendKind::Embed)?;
        let id = client.descriptor().fingerprint();
        Ok((Arc::new(client), id))
    }

    pub fn backends(&self) -> Result<Backends, CliError> {
        let (summarizer, summarizer_id) = self.summarizer()?;
        let (embedder, embedder_id) = self.embedder()?;
        let generator = self.client(BackendKind::Generate)?;
        let generator_id = generator.descriptor().fingerprint();
        Ok(Backends::new(
            summarizer,
            summarizer_id,
            embedder,
            embedder_id,
            Arc::new(generator),
            generator_id,
        ))
    }

    /// Documents of a split, optionally reduced to the seeded sample.
    pub fn select_docs(
        &self,
        split: Split,
        limit: Option<usize>,
    ) -> Result<Vec<&lexchain::corpus::Document>, CliError> {
        let docs: Vec<_> = match limit {
            None => self.corpus.split_docs(split).collect(),
            Some(n) => {
                let ids =
                    lexchain::chain::sample_split_ids(&self.corpus, split, n, self.config.seed);
                ids.iter()
                    .map(|id| self.corpus.get(id).expect("sampled ids exist"))
                    .collect()
            }
        };
        if docs.is_empty() {
            return Err(CliError::Config(format!("split {split} has no documents")));
        }
        Ok(docs)
    }
}

/// Applies `f` to every item on a bounded worker pool, preserving input
/// order in the output.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let n = items.len();
    if n == 0 {
        return Vec::new();
    }
    let workers = workers.clamp(1, n);
    let mut slots: Vec<Option<R>> = Vec::new();
    slots.resize_with(n, || None);
    let next = AtomicUsize::new(0);
    let (tx, rx) = std::sync::mpsc::channel::<(usize, R)>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let f = &f;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                if tx.send((i, f(&items[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, value) in rx {
            slots[i] = Some(value);
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.expect("worker produced every slot"))
        .collect()
}
