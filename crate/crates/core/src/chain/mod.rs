//! Per-document orchestration of the full prompt chain: summarize,
//! retrieve, build the few-shot prompt, generate, and parse the label —
//! with greedy or self-consistency decoding.
//!
//! The prompt path works on a gold-erased view of the document: nothing
//! past [`Chain::classify`]'s precondition check can read a gold label.

mod cache;

pub use cache::{content_key, StageCache};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{
    BackendClient, BackendError, Decoding, EmbedBackend, EmbeddingVector, GenerateBackend,
    GenerationRequest, SummarizeBackend,
};
use crate::chunking::{
    iterative_summarize, ChunkingError, Summary, SummaryStore, TokenBudget, TokenCounter,
};
use crate::corpus::{Corpus, Document, LabelId, LabelSpace, Split};
use crate::index::{EmbeddingIndex, IndexError, NeighborHit};
use crate::prompting::{
    build_fewshot, Exemplar, PromptBundle, PromptError, PromptTemplate, GENERATION_RESERVE,
};

/// Decoding strategy for the label-generation step. Self-consistency
/// samples only this final step; the summarization rounds stay greedy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainDecoding {
    Greedy,
    SelfConsistency {
        samples: usize,
        temperature: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Neighbors retrieved per target, 1..=8.
    pub k_neighbors: usize,
    pub summary_budget: TokenBudget,
    pub decoding: ChainDecoding,
    /// Size of the seeded dev subset used for prompt development.
    pub dev_sample_size: usize,
}

impl ChainConfig {
    pub const DEFAULT_K: usize = 8;
    pub const DEFAULT_DEV_SAMPLE: usize = 40;

    pub fn new(
        k_neighbors: usize,
        summary_budget: TokenBudget,
        decoding: ChainDecoding,
    ) -> Result<Self, ChainError> {
        if !(1..=8).contains(&k_neighbors) {
            return Err(ChainError::InvalidConfig(format!(
                "k_neighbors must be in 1..=8, got {k_neighbors}"
            )));
        }
        if let ChainDecoding::SelfConsistency { samples, .. } = decoding {
            if !(2..=10).contains(&samples) {
                return Err(ChainError::InvalidConfig(format!(
                    "self-consistency samples must be in 2..=10, got {samples}"
                )));
            }
        }
        Ok(ChainConfig {
            k_neighbors,
            summary_budget,
            decoding,
            dev_sample_size: Self::DEFAULT_DEV_SAMPLE,
        })
    }
}

/// One classified document. `votes` is present under self-consistency
/// only and its values sum to the sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: String,
    pub label: LabelId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub votes: Option<BTreeMap<LabelId, u32>>,
    #[serde(rename = "fallback")]
    pub parse_fallback: bool,
    /// Prompt audit record; persisted separately, not in predictions files.
    #[serde(skip)]
    pub audit: Option<PromptBundle>,
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("invalid chain config: {0}")]
    InvalidConfig(String),
    #[error("document {doc_id:?} is present in the training index; refusing self-retrieval")]
    SelfRetrieval { doc_id: String },
    #[error("summarize stage, document {doc_id:?}: {source}")]
    Summarize {
        doc_id: String,
        #[source]
        source: ChunkingError,
    },
    #[error("embed stage, document {doc_id:?}: {source}")]
    Embed {
        doc_id: String,
        #[source]
        source: BackendError,
    },
    #[error("query stage, document {doc_id:?}: {source}")]
    Query {
        doc_id: String,
        #[source]
        source: IndexError,
    },
    #[error("prompt stage, document {doc_id:?}: {source}")]
    Prompt {
        doc_id: String,
        #[source]
        source: PromptError,
    },
    #[error("generate stage, document {doc_id:?}: {source}")]
    Generate {
        doc_id: String,
        #[source]
        source: BackendError,
    },
    #[error("no summary stored for training document {doc_id:?}")]
    MissingTrainSummary { doc_id: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl ChainError {
    /// Stage name for failure manifests.
    pub fn stage(&self) -> &'static str {
        match self {
            ChainError::InvalidConfig(_) => "config",
            ChainError::SelfRetrieval { .. } => "precondition",
            ChainError::Summarize { .. } => "summarize",
            ChainError::Embed { .. } => "embed",
            ChainError::Query { .. } | ChainError::MissingTrainSummary { .. } => "query",
            ChainError::Prompt { .. } => "prompt",
            ChainError::Generate { .. } => "generate",
            ChainError::Io(_) | ChainError::Parse { .. } => "io",
        }
    }

    /// True when the underlying cause is a backend transport or service
    /// failure rather than a local validation problem.
    pub fn is_backend_failure(&self) -> bool {
        matches!(
            self,
            ChainError::Generate {
                source: BackendError::Transport { .. } | BackendError::Service { .. },
                ..
            } | ChainError::Embed {
                source: BackendError::Transport { .. } | BackendError::Service { .. },
                ..
            } | ChainError::Summarize {
                source: ChunkingError::Backend {
                    source: BackendError::Transport { .. } | BackendError::Service { .. },
                    ..
                },
                ..
            }
        )
    }
}

/// The three service handles plus their cache fingerprints.
pub struct Backends {
    summarizer: std::sync::Arc<dyn SummarizeBackend>,
    summarizer_id: String,
    embedder: std::sync::Arc<dyn EmbedBackend>,
    embedder_id: String,
    generator: std::sync::Arc<dyn GenerateBackend>,
    generator_id: String,
}

impl Backends {
    pub fn new(
        summarizer: std::sync::Arc<dyn SummarizeBackend>,
        summarizer_id: impl Into<String>,
        embedder: std::sync::Arc<dyn EmbedBackend>,
        embedder_id: impl Into<String>,
        generator: std::sync::Arc<dyn GenerateBackend>,
        generator_id: impl Into<String>,
    ) -> Self {
        Backends {
            summarizer,
            summarizer_id: summarizer_id.into(),
            embedder,
            embedder_id: embedder_id.into(),
            generator,
            generator_id: generator_id.into(),
        }
    }

    /// Wraps three kind-matched clients, deriving cache fingerprints
    /// from their descriptors.
    pub fn from_clients(
        summarizer: BackendClient,
        embedder: BackendClient,
        generator: BackendClient,
    ) -> Self {
        let summarizer_id = summarizer.descriptor().fingerprint();
        let embedder_id = embedder.descriptor().fingerprint();
        let generator_id = generator.descriptor().fingerprint();
        Backends {
            summarizer: std::sync::Arc::new(summarizer),
            summarizer_id,
            embedder: std::sync::Arc::new(embedder),
            embedder_id,
            generator: std::sync::Arc::new(generator),
            generator_id,
        }
    }

    pub fn summarizer(&self) -> &dyn SummarizeBackend {
        self.summarizer.as_ref()
    }

    pub fn embedder(&self) -> &dyn EmbedBackend {
        self.embedder.as_ref()
    }

    pub fn generator(&self) -> &dyn GenerateBackend {
        self.generator.as_ref()
    }

    pub fn summarizer_id(&self) -> &str {
        &self.summarizer_id
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn generator_id(&self) -> &str {
        &self.generator_id
    }
}

/// Cached value for the summarize stage; keyed by content, so the doc id
/// is attached on retrieval rather than stored.
#[derive(Serialize, Deserialize)]
struct CachedSummary {
    text: String,
    token_count: usize,
    rounds: usize,
    truncated: bool,
}

/// Summarizes one document, consulting the cache first. The key covers
/// the backend fingerprint, budget, counter, and full text. The flag
/// reports whether the result came from the cache.
pub fn summarize_cached(
    doc_id: &str,
    text: &str,
    backend: &dyn SummarizeBackend,
    backend_id: &str,
    budget: &TokenBudget,
    counter: &TokenCounter,
    cache: Option<&StageCache>,
) -> Result<(Summary, bool), ChunkingError> {
    let key = content_key(&[
        "summary",
        backend_id,
        &format!(
            "{}:{}:{}:{:?}",
            budget.context_window, budget.summary_target, budget.max_rounds, counter
        ),
        text,
    ]);
    if let Some(cached) = cache.and_then(|c| c.get::<CachedSummary>(&key)) {
        return Ok((
            Summary {
                doc_id: doc_id.to_string(),
                text: cached.text,
                token_count: cached.token_count,
                rounds: cached.rounds,
                truncated: cached.truncated,
            },
            true,
        ));
    }
    let summary = iterative_summarize(doc_id, text, backend, budget, counter)?;
    if let Some(cache) = cache {
        let _ = cache.put(
            &key,
            &CachedSummary {
                text: summary.text.clone(),
                token_count: summary.token_count,
                rounds: summary.rounds,
                truncated: summary.truncated,
            },
        );
    }
    Ok((summary, false))
}

/// Embeds a text, consulting the cache first.
pub fn embed_cached(
    text: &str,
    backend: &dyn EmbedBackend,
    backend_id: &str,
    cache: Option<&StageCache>,
) -> Result<(EmbeddingVector, bool), BackendError> {
    let key = content_key(&["embedding", backend_id, text]);
    if let Some(cached) = cache.and_then(|c| c.get::<EmbeddingVector>(&key)) {
        return Ok((cached, true));
    }
    let vector = backend.embed(text)?;
    if let Some(cache) = cache {
        let _ = cache.put(&key, &vector);
    }
    Ok((vector, false))
}

/// Normalizes generated text for option matching: lowercase, punctuation
/// to spaces, whitespace collapsed.
fn normalize_for_match(text: &str) -> String {
    let lowered: String = text
        .chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_lowercase().next().unwrap_or(c)
            } else {
                ' '
            }
        })
        .collect();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Earliest position where `needle` occurs in `haystack` on word
/// boundaries, so a short option like "A" cannot match inside "cannot".
/// Both strings must already be normalized (single spaces).
fn find_on_word_boundary(haystack: &str, needle: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(offset) = haystack[from..].find(needle) {
        let pos = from + offset;
        let end = pos + needle.len();
        let starts_word = pos == 0 || haystack.as_bytes()[pos - 1] == b' ';
        let ends_word = end == haystack.len() || haystack.as_bytes()[end] == b' ';
        if starts_word && ends_word {
            return Some(pos);
        }
        from = pos + 1;
    }
    None
}

/// Maps generated text to one of the offered options. Exact normalized
/// match wins; otherwise the option whose name occurs earliest in the
/// generation as a whole-word substring (ties by options order);
/// otherwise falls back to the nearest neighbor's label with the
/// fallback flag set.
pub fn parse_label(
    generated: &str,
    options: &[LabelId],
    nearest_neighbor_label: &LabelId,
) -> (LabelId, bool) {
    let normalized = normalize_for_match(generated);
    for option in options {
        if normalize_for_match(option.as_str()) == normalized {
            return (option.clone(), false);
        }
    }
    let mut best: Option<(usize, &LabelId)> = None;
    for option in options {
        let needle = normalize_for_match(option.as_str());
        if needle.is_empty() {
            continue;
        }
        if let Some(pos) = find_on_word_boundary(&normalized, &needle) {
            if best.is_none_or(|(p, _)| pos < p) {
                best = Some((pos, option));
            }
        }
    }
    match best {
        Some((_, option)) => (option.clone(), false),
        None => (nearest_neighbor_label.clone(), true),
    }
}

/// Majority vote over sampled labels. Ties prefer the nearest neighbor's
/// label when it is among the tied set, else the tied label generated
/// earliest.
pub fn self_consistency_vote(labels: &[LabelId], nearest_neighbor_label: &LabelId) -> LabelId {
    assert!(!labels.is_empty(), "vote requires at least one label");
    let mut tally: Vec<(&LabelId, usize)> = Vec::new();
    for label in labels {
        match tally.iter_mut().find(|(l, _)| *l == label) {
            Some((_, count)) => *count += 1,
            None => tally.push((label, 1)),
        }
    }
    let max = tally.iter().map(|(_, n)| *n).max().unwrap();
    let tied: Vec<&LabelId> = tally
        .iter()
        .filter(|(_, n)| *n == max)
        .map(|(l, _)| *l)
        .collect();
    if tied.contains(&nearest_neighbor_label) {
        return nearest_neighbor_label.clone();
    }
    // `tally` holds first occurrences in generation order.
    tied[0].clone()
}

type LabelVotes = Option<BTreeMap<LabelId, u32>>;

/// Gold-erased view handed to the prompt path.
struct TargetDoc<'a> {
    id: &'a str,
    text: &'a str,
}

/// A failed document in a batch run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchFailure {
    pub doc_id: String,
    pub stage: String,
    pub message: String,
    /// Whether the cause was a backend transport/service failure.
    pub backend: bool,
}

#[derive(Debug, Default)]
pub struct BatchResult {
    /// One prediction per succeeded document, in corpus order.
    pub predictions: Vec<Prediction>,
    pub failures: Vec<BatchFailure>,
}

impl BatchResult {
    pub fn failure_fraction(&self) -> f64 {
        let total = self.predictions.len() + self.failures.len();
        if total == 0 {
            0.0
        } else {
            self.failures.len() as f64 / total as f64
        }
    }
}

/// All shared state for classifying documents against one training index.
pub struct Chain<'a> {
    pub space: &'a LabelSpace,
    pub index: &'a EmbeddingIndex,
    pub train_summaries: &'a SummaryStore,
    pub backends: &'a Backends,
    pub template: &'a PromptTemplate,
    pub counter: TokenCounter,
    pub config: &'a ChainConfig,
    pub cache: Option<&'a StageCache>,
}

impl Chain<'_> {
    /// Classifies one document: summarize → embed → retrieve → restrict
    /// labels → build prompt → generate → parse. The document must not be
    /// present in the training index.
    pub fn classify(&self, doc: &Document) -> Result<Prediction, ChainError> {
        if self.index.contains(&doc.id) {
            return Err(ChainError::SelfRetrieval {
                doc_id: doc.id.clone(),
            });
        }
        self.classify_target(TargetDoc {
            id: &doc.id,
            text: &doc.text,
        })
    }

    fn classify_target(&self, target: TargetDoc<'_>) -> Result<Prediction, ChainError> {
        let doc_id = target.id.to_string();

        let (summary, _) = summarize_cached(
            target.id,
            target.text,
            self.backends.summarizer(),
            &self.backends.summarizer_id,
            &self.config.summary_budget,
            &self.counter,
            self.cache,
        )
        .map_err(|source| ChainError::Summarize {
            doc_id: doc_id.clone(),
            source,
        })?;

        let (embedding, _) = embed_cached(
            &summary.text,
            self.backends.embedder(),
            &self.backends.embedder_id,
            self.cache,
        )
        .map_err(|source| ChainError::Embed {
            doc_id: doc_id.clone(),
            source,
        })?;

        let hits = self
            .index
            .query(&embedding, self.config.k_neighbors)
            .map_err(|source| ChainError::Query {
                doc_id: doc_id.clone(),
                source,
            })?;

        let exemplars = self.exemplars_for(&hits)?;
        let nearest_label = hits[0].label.clone();

        let bundle = build_fewshot(
            &summary,
            &exemplars,
            self.space,
            self.template,
            self.backends.generator().context_window(),
            &self.counter,
        )
        .map_err(|source| ChainError::Prompt {
            doc_id: doc_id.clone(),
            source,
        })?;

        let (label, votes, parse_fallback) = self.generate_label(&doc_id, &bundle, &nearest_label)?;

        Ok(Prediction {
            doc_id,
            label,
            votes,
            parse_fallback,
            audit: Some(bundle),
        })
    }

    fn exemplars_for(&self, hits: &[NeighborHit]) -> Result<Vec<Exemplar>, ChainError> {
        hits.iter()
            .map(|hit| {
                let summary = self.train_summaries.get(&hit.doc_id).ok_or_else(|| {
                    ChainError::MissingTrainSummary {
                        doc_id: hit.doc_id.clone(),
                    }
                })?;
                Ok(Exemplar {
                    hit: hit.clone(),
                    summary: summary.text.clone(),
                })
            })
            .collect()
    }

    fn generate_label(
        &self,
        doc_id: &str,
        bundle: &PromptBundle,
        nearest_label: &LabelId,
    ) -> Result<(LabelId, LabelVotes, bool), ChainError> {
        let generate = |decoding: Decoding| -> Result<String, ChainError> {
            self.backends
                .generator()
                .generate(&GenerationRequest {
                    prompt: bundle.text.clone(),
                    max_new_tokens: GENERATION_RESERVE,
                    decoding,
                })
                .map_err(|source| ChainError::Generate {
                    doc_id: doc_id.to_string(),
                    source,
                })
        };

        match self.config.decoding {
            ChainDecoding::Greedy => {
                let output = generate(Decoding::Greedy)?;
                let (label, fallback) = parse_label(&output, &bundle.options, nearest_label);
                Ok((label, None, fallback))
            }
            ChainDecoding::SelfConsistency {
                samples,
                temperature,
                seed,
            } => {
                // Per-sample seeds mix the doc id so two documents never
                // share a draw sequence, while staying reproducible.
                let doc_seed = seed ^ crate::backend::doc_hash(doc_id);
                let mut labels = Vec::with_capacity(samples);
                let mut any_fallback = false;
                for sample_idx in 0..samples {
                    let output = generate(Decoding::Sample {
                        temperature,
                        seed: doc_seed.wrapping_add(sample_idx as u64),
                    })?;
                    let (label, fallback) = parse_label(&output, &bundle.options, nearest_label);
                    any_fallback |= fallback;
                    labels.push(label);
                }
                let winner = self_consistency_vote(&labels, nearest_label);
                let mut votes = BTreeMap::new();
                for label in labels {
                    *votes.entry(label).or_insert(0u32) += 1;
                }
                Ok((winner, Some(votes), any_fallback))
            }
        }
    }

    /// Classifies every document of `split` (or the seeded `limit`-sized
    /// subset) with a bounded worker pool. Failures are collected, not
    /// fatal; output order always matches corpus order.
    pub fn run_batch(
        &self,
        corpus: &Corpus,
        split: Split,
        workers: usize,
        limit: Option<usize>,
        seed: u64,
    ) -> BatchResult {
        let docs: Vec<&Document> = match limit {
            None => corpus.split_docs(split).collect(),
            Some(n) => {
                let ids = sample_split_ids(corpus, split, n, seed);
                ids.iter()
                    .map(|id| corpus.get(id).expect("sampled ids exist"))
                    .collect()
            }
        };
        let n = docs.len();
        if n == 0 {
            return BatchResult::default();
        }
        let workers = workers.clamp(1, n);

        let mut slots: Vec<Option<Result<Prediction, ChainError>>> = Vec::new();
        slots.resize_with(n, || None);
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<(usize, Result<Prediction, ChainError>)>();

        std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let next = &next;
                let docs = &docs;
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= docs.len() {
                        break;
                    }
                    let result = self.classify(docs[i]);
                    if tx.send((i, result)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for (i, result) in rx {
                slots[i] = Some(result);
            }
        });

        let mut batch = BatchResult::default();
        for (i, slot) in slots.into_iter().enumerate() {
            match slot.expect("every doc classified") {
                Ok(prediction) => batch.predictions.push(prediction),
                Err(err) => batch.failures.push(BatchFailure {
                    doc_id: docs[i].id.clone(),
                    stage: err.stage().to_string(),
                    backend: err.is_backend_failure(),
                    message: err.to_string(),
                }),
            }
        }
        batch
    }
}

/// Seeded sample of `n` document ids from a split, in corpus order.
/// Returns all ids when the split has `n` or fewer.
pub fn sample_split_ids(corpus: &Corpus, split: Split, n: usize, seed: u64) -> Vec<String> {
    let ids: Vec<&str> = corpus.split_docs(split).map(|d| d.id.as_str()).collect();
    if ids.len() <= n {
        return ids.into_iter().map(String::from).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, ids.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| ids[i].to_string()).collect()
}

/// Writes predictions as JSON Lines `{doc_id, label, votes?, fallback}`.
pub fn write_predictions_jsonl(
    path: impl AsRef<Path>,
    predictions: &[Prediction],
) -> Result<(), ChainError> {
    let file = File::create(path.as_ref())?;
    let mut writer = BufWriter::new(file);
    for prediction in predictions {
        serde_json::to_writer(&mut writer, prediction).map_err(|e| ChainError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_predictions_jsonl(path: impl AsRef<Path>) -> Result<Vec<Prediction>, ChainError> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut predictions = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let prediction: Prediction =
            serde_json::from_str(&line).map_err(|e| ChainError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        predictions.push(prediction);
    }
    Ok(predictions)
}

fn sanitize_filename(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes each prediction's prompt bundle to `dir/<doc_id>.json`. Ids
/// that sanitize to the same filename get a content-hash suffix.
pub fn write_audit_bundles(
    dir: impl AsRef<Path>,
    predictions: &[Prediction],
) -> Result<(), ChainError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut used = std::collections::HashSet::new();
    for prediction in predictions {
        let Some(bundle) = &prediction.audit else {
            continue;
        };
        let mut name = sanitize_filename(&prediction.doc_id);
        if !used.insert(name.clone()) {
            name = format!("{name}-{}", &content_key(&[&prediction.doc_id])[..8]);
            used.insert(name.clone());
        }
        let path = dir.join(format!("{name}.json"));
        let file = File::create(path)?;
        serde_json::to_writer_pretty(BufWriter::new(file), bundle).map_err(|e| {
            ChainError::Parse {
                line: 0,
                message: e.to_string(),
            }
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(s: &str) -> LabelId {
        LabelId::new(s)
    }

    #[test]
    fn parse_exact_match() {
        let options = vec![label("YES"), label("NO")];
        assert_eq!(
            parse_label("YES", &options, &label("NO")),
            (label("YES"), false)
        );
        assert_eq!(
            parse_label(" yes.\n", &options, &label("NO")),
            (label("YES"), false)
        );
    }

    #[test]
    fn parse_substring_with_normalization() {
        let options: Vec<LabelId> = ["Criminal Procedure", "Civil Rights"]
            .iter()
            .map(|s| label(s))
            .collect();
        assert_eq!(
            parse_label(" civil rights.\n", &options, &options[0]),
            (label("Civil Rights"), false)
        );
        assert_eq!(
            parse_label(
                "The area is criminal procedure, I believe",
                &options,
                &options[1]
            ),
            (label("Criminal Procedure"), false)
        );
    }

    #[test]
    fn parse_earliest_occurrence_wins() {
        let options = vec![label("alpha"), label("beta")];
        assert_eq!(
            parse_label("maybe beta or alpha", &options, &options[0]),
            (label("beta"), false)
        );
    }

    #[test]
    fn parse_falls_back_to_nearest() {
        let options = vec![label("A"), label("B")];
        assert_eq!(
            parse_label("I cannot determine this", &options, &label("B")),
            (label("B"), true)
        );
    }

    #[test]
    fn vote_strict_majority() {
        let labels = [label("A"), label("A"), label("B")];
        assert_eq!(self_consistency_vote(&labels, &label("C")), label("A"));
    }

    #[test]
    fn vote_tie_prefers_nearest() {
        let labels = [label("A"), label("B")];
        assert_eq!(self_consistency_vote(&labels, &label("B")), label("B"));
    }

    #[test]
    fn vote_tie_without_nearest_takes_earliest() {
        // Counts: A=2, B=2, C=1. C is not tied at the max, so the
        // earliest-generated tied label (A) wins.
        let labels = [label("A"), label("B"), label("B"), label("A"), label("C")];
        assert_eq!(self_consistency_vote(&labels, &label("C")), label("A"));
    }

    #[test]
    fn vote_returns_a_member() {
        let labels = [label("X"), label("Y"), label("X")];
        let winner = self_consistency_vote(&labels, &label("Z"));
        assert!(labels.contains(&winner));
    }
}
