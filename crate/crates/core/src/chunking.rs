//! Sentence segmentation, token-budgeted chunk packing, and the iterative
//! summarize-until-short loop.
//!
//! Long documents never fit a model window, so each round packs sentences
//! into window-sized chunks, summarizes every chunk, and concatenates the
//! chunk summaries into the next round's input. The loop stops once the
//! text fits the summary target, or truncates after `max_rounds`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, SummarizeBackend};

/// Tokens reserved from the context window for the summarization
/// instruction template when packing chunks.
pub const CHUNK_PROMPT_RESERVE: usize = 24;

/// Token limits for one summarization run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget {
    /// Model context window in tokens (1024 or 2048 for the supported
    /// backends; other values permitted).
    pub context_window: usize,
    /// Target length of the final summary.
    pub summary_target: usize,
    /// Upper bound on summarization rounds before truncation kicks in.
    pub max_rounds: usize,
}

impl TokenBudget {
    pub const DEFAULT_SUMMARY_TARGET: usize = 128;
    pub const DEFAULT_MAX_ROUNDS: usize = 8;

    pub fn new(
        context_window: usize,
        summary_target: usize,
        max_rounds: usize,
    ) -> Result<Self, ChunkingError> {
        if context_window <= CHUNK_PROMPT_RESERVE {
            return Err(ChunkingError::InvalidBudget(format!(
                "context_window must exceed the {CHUNK_PROMPT_RESERVE}-token prompt reserve"
            )));
        }
        if summary_target == 0 || summary_target >= context_window {
            return Err(ChunkingError::InvalidBudget(
                "summary_target must be positive and below context_window".into(),
            ));
        }
        if max_rounds == 0 {
            return Err(ChunkingError::InvalidBudget("max_rounds must be >= 1".into()));
        }
        Ok(TokenBudget {
            context_window,
            summary_target,
            max_rounds,
        })
    }

    pub fn with_window(context_window: usize) -> Result<Self, ChunkingError> {
        TokenBudget::new(
            context_window,
            Self::DEFAULT_SUMMARY_TARGET,
            Self::DEFAULT_MAX_ROUNDS,
        )
    }
}

/// Token counting strategy. None of the supported services publish their
/// tokenizer, so counting is injectable; the heuristic default stays on
/// the safe side of real subword rates for English prose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenCounter {
    /// `ceil(words * 4 / 3)` — roughly four subword tokens per three words.
    #[default]
    Heuristic,
    /// Whitespace-separated word count.
    Whitespace,
}

impl TokenCounter {
    pub fn count(&self, text: &str) -> usize {
        let words = text.split_whitespace().count();
        match self {
            TokenCounter::Heuristic => (words * 4).div_ceil(3),
            TokenCounter::Whitespace => words,
        }
    }

    /// Worst-case extra tokens introduced by joining two texts with a
    /// single space. Both strategies count words, so joining never adds.
    pub fn join_overhead(&self) -> usize {
        0
    }
}

/// Words that take a trailing period without ending a sentence. Matched
/// case-insensitively against the token preceding the period, inner dots
/// included (so "e.g." and "U.S." resolve to one token).
const ABBREVIATIONS: [&str; 26] = [
    "art", "app", "no", "nos", "para", "paras", "p", "pp", "vol", "fig", "sec", "v", "vs", "mr",
    "mrs", "ms", "dr", "prof", "inc", "ltd", "co", "corp", "cf", "u.s", "u.s.c", "§",
];

fn is_abbreviation(text: &str, dot_byte: usize) -> bool {
    // Walk back over the non-whitespace run preceding the period.
    let head = &text[..dot_byte];
    let token_start = head
        .rfind(char::is_whitespace)
        .map(|i| i + head[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(0);
    let token = head[token_start..].trim_start_matches(|c: char| !c.is_alphanumeric() && c != '§');
    if token.is_empty() {
        return false;
    }
    let token = token.to_lowercase();
    ABBREVIATIONS.contains(&token.as_str())
}

/// Splits text into sentences on `.`, `?`, or `!` followed by whitespace
/// and an uppercase letter or digit, with an abbreviation exception list
/// tuned for legal citations. Returns the whole trimmed text as a single
/// sentence when no boundary is found.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let mut sentences = Vec::new();
    let mut start_byte = 0usize;

    for idx in 0..n {
        let (byte_i, c) = chars[idx];
        if !matches!(c, '.' | '?' | '!') {
            continue;
        }
        let mut j = idx + 1;
        if j >= n || !chars[j].1.is_whitespace() {
            continue;
        }
        while j < n && chars[j].1.is_whitespace() {
            j += 1;
        }
        if j >= n {
            continue;
        }
        let next = chars[j].1;
        if !(next.is_uppercase() || next.is_ascii_digit()) {
            continue;
        }
        if c == '.' && is_abbreviation(text, byte_i) {
            continue;
        }
        let end = byte_i + c.len_utf8();
        let sentence = text[start_byte..end].trim();
        if !sentence.is_empty() {
            sentences.push(sentence.to_string());
        }
        start_byte = chars[j].0;
    }

    let tail = text[start_byte..].trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

/// A window-sized batch of consecutive sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub sentences: Vec<String>,
    pub token_count: usize,
    /// Set when a single sentence exceeded the budget on its own and was
    /// hard-truncated to fit.
    pub truncated: bool,
}

impl Chunk {
    pub fn text(&self) -> String {
        self.sentences.join(" ")
    }
}

/// Returns the longest word-prefix of `text` whose token count fits
/// `limit`. Counts are monotone in prefix length, so binary search works.
fn truncate_to_tokens(text: &str, limit: usize, counter: &TokenCounter) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let (mut lo, mut hi) = (0usize, words.len());
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if counter.count(&words[..mid].join(" ")) <= limit {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    words[..lo].join(" ")
}

/// Greedily stacks sentences in order: each chunk takes the maximal prefix
/// of the remaining sentences that fits `context_window` minus the prompt
/// reserve. A sentence too large for an empty chunk becomes its own chunk,
/// truncated and flagged. Order is never changed.
pub fn pack_chunks(
    sentences: &[String],
    budget: &TokenBudget,
    counter: &TokenCounter,
) -> Vec<Chunk> {
    let limit = budget.context_window - CHUNK_PROMPT_RESERVE;
    let mut chunks = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut current_text = String::new();

    let mut i = 0;
    while i < sentences.len() {
        let sentence = &sentences[i];
        let candidate = if current_text.is_empty() {
            sentence.clone()
        } else {
            format!("{current_text} {sentence}")
        };
        if counter.count(&candidate) <= limit {
            current.push(sentence.clone());
            current_text = candidate;
            i += 1;
        } else if current.is_empty() {
            let truncated = truncate_to_tokens(sentence, limit, counter);
            let token_count = counter.count(&truncated);
            chunks.push(Chunk {
                sentences: vec![truncated],
                token_count,
                truncated: true,
            });
            i += 1;
        } else {
            chunks.push(Chunk {
                sentences: std::mem::take(&mut current),
                token_count: counter.count(&current_text),
                truncated: false,
            });
            current_text.clear();
        }
    }
    if !current.is_empty() {
        chunks.push(Chunk {
            sentences: current,
            token_count: counter.count(&current_text),
            truncated: false,
        });
    }
    chunks
}

/// Condensed document text plus provenance of the summarization loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub doc_id: String,
    pub text: String,
    pub token_count: usize,
    /// Summarization passes used (>= 1; every input takes at least one).
    pub rounds: usize,
    /// Set when the loop hit `max_rounds` and the text was cut to fit.
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Error)]
pub enum ChunkingError {
    #[error("document text is empty")]
    EmptyText,
    #[error("invalid token budget: {0}")]
    InvalidBudget(String),
    #[error("round {round}, chunk {chunk}: {source}")]
    Backend {
        round: usize,
        chunk: usize,
        #[source]
        source: BackendError,
    },
    #[error("round {round}, chunk {chunk}: backend returned an empty summary")]
    EmptySummary { round: usize, chunk: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Runs the summarize loop for one document. Each round packs the current
/// text into chunks, summarizes every chunk, and joins the chunk summaries
/// with a single space in original order. Stops when the joined text fits
/// `summary_target`; at `max_rounds` the text is hard-truncated instead.
///
/// Every input goes through at least one summarizer pass, so `rounds >= 1`
/// even for texts already below the target.
pub fn iterative_summarize(
    doc_id: &str,
    text: &str,
    summarizer: &dyn SummarizeBackend,
    budget: &TokenBudget,
    counter: &TokenCounter,
) -> Result<Summary, ChunkingError> {
    if text.trim().is_empty() {
        return Err(ChunkingError::EmptyText);
    }

    let mut current = text.to_string();
    let mut rounds = 0usize;
    loop {
        rounds += 1;
        let sentences = segment_sentences(&current);
        let chunks = pack_chunks(&sentences, budget, counter);
        let mut parts = Vec::with_capacity(chunks.len());
        let mut reported = None;
        for (chunk_idx, chunk) in chunks.iter().enumerate() {
            let out = summarizer
                .summarize_chunk(&chunk.text())
                .map_err(|source| ChunkingError::Backend {
                    round: rounds,
                    chunk: chunk_idx,
                    source,
                })?;
            if out.text.trim().is_empty() {
                return Err(ChunkingError::EmptySummary {
                    round: rounds,
                    chunk: chunk_idx,
                });
            }
            if chunks.len() == 1 {
                // A service-reported count overrides the heuristic when
                // the round had a single chunk (the common final round).
                reported = out.reported_tokens;
            }
            parts.push(out.text.trim().to_string());
        }
        current = parts.join(" ");
        let token_count = reported.unwrap_or_else(|| counter.count(&current));

        if token_count <= budget.summary_target {
            return Ok(Summary {
                doc_id: doc_id.to_string(),
                text: current,
                token_count,
                rounds,
                truncated: false,
            });
        }
        if rounds >= budget.max_rounds {
            let text = truncate_to_tokens(&current, budget.summary_target, counter);
            let token_count = counter.count(&text);
            return Ok(Summary {
                doc_id: doc_id.to_string(),
                text,
                token_count,
                rounds,
                truncated: true,
            });
        }
    }
}

/// Writes summaries as JSON Lines so downstream stages can run without
/// recomputation.
pub fn write_summaries_jsonl(
    path: impl AsRef<Path>,
    summaries: &[Summary],
) -> Result<(), ChunkingError> {
    let file = File::create(path.as_ref())?;
    let mut writer = BufWriter::new(file);
    for summary in summaries {
        serde_json::to_writer(&mut writer, summary).map_err(|e| ChunkingError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_summaries_jsonl(path: impl AsRef<Path>) -> Result<Vec<Summary>, ChunkingError> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut summaries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let summary: Summary =
            serde_json::from_str(&line).map_err(|e| ChunkingError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        summaries.push(summary);
    }
    Ok(summaries)
}

/// Summaries keyed by document id, for exemplar lookup during retrieval.
#[derive(Debug, Default, Clone)]
pub struct SummaryStore {
    map: HashMap<String, Summary>,
}

impl SummaryStore {
    pub fn new(summaries: Vec<Summary>) -> Self {
        let map = summaries
            .into_iter()
            .map(|s| (s.doc_id.clone(), s))
            .collect();
        SummaryStore { map }
    }

    pub fn from_jsonl(path: impl AsRef<Path>) -> Result<Self, ChunkingError> {
        Ok(SummaryStore::new(read_summaries_jsonl(path)?))
    }

    pub fn get(&self, doc_id: &str) -> Option<&Summary> {
        self.map.get(doc_id)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ChunkSummary;

    /// Summarizer that returns its input unchanged. Never converges.
    struct EchoBackend;
    impl SummarizeBackend for EchoBackend {
        fn summarize_chunk(&self, text: &str) -> Result<ChunkSummary, BackendError> {
            Ok(ChunkSummary {
                text: text.to_string(),
                reported_tokens: None,
            })
        }
    }

    /// Summarizer that keeps only the first sentence of each chunk.
    struct FirstSentenceBackend;
    impl SummarizeBackend for FirstSentenceBackend {
        fn summarize_chunk(&self, text: &str) -> Result<ChunkSummary, BackendError> {
            let sentences = segment_sentences(text);
            Ok(ChunkSummary {
                text: sentences.into_iter().next().unwrap_or_default(),
                reported_tokens: None,
            })
        }
    }

    #[test]
    fn segments_canonical_punctuation() {
        assert_eq!(segment_sentences("A. B? C!"), vec!["A.", "B?", "C!"]);
    }

    #[test]
    fn no_boundary_returns_whole_text() {
        assert_eq!(
            segment_sentences("No terminator here"),
            vec!["No terminator here"]
        );
    }

    #[test]
    fn legal_abbreviations_do_not_split() {
        assert_eq!(
            segment_sentences("See Art. 6 § 1. Next sentence."),
            vec!["See Art. 6 § 1.", "Next sentence."]
        );
        assert_eq!(
            segment_sentences("Smith v. Jones was cited. The court agreed."),
            vec!["Smith v. Jones was cited.", "The court agreed."]
        );
        assert_eq!(
            segment_sentences("Application No. 123 was filed. It succeeded."),
            vec!["Application No. 123 was filed.", "It succeeded."]
        );
        assert_eq!(
            segment_sentences("Under U.S. Law this holds. Indeed."),
            vec!["Under U.S. Law this holds.", "Indeed."]
        );
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(
            segment_sentences("The judgment of 1. e.g. something holds"),
            vec!["The judgment of 1. e.g. something holds"]
        );
    }

    #[test]
    fn segment_round_trip_normalizes_to_input() {
        let text = "First point.  Second point? Third!";
        let joined = segment_sentences(text).join(" ");
        let normalize = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
        assert_eq!(normalize(&joined), normalize(text));
    }

    #[test]
    fn counter_examples() {
        let heuristic = TokenCounter::Heuristic;
        let whitespace = TokenCounter::Whitespace;
        assert_eq!(heuristic.count(""), 0);
        assert_eq!(whitespace.count("one two three"), 3);
        let paragraph = vec!["word"; 512].join(" ");
        assert_eq!(heuristic.count(&paragraph), 683);
    }

    fn sentence_of_words(n: usize) -> String {
        let mut words = vec!["word"; n - 1];
        words.push("end.");
        words.join(" ")
    }

    #[test]
    fn pack_fits_single_chunk() {
        // 10 sentences of 100 heuristic tokens (75 words) each; window
        // 1024 minus reserve 24 leaves exactly 1000.
        let sentences: Vec<String> = (0..10).map(|_| sentence_of_words(75)).collect();
        let budget = TokenBudget::with_window(1024).unwrap();
        let chunks = pack_chunks(&sentences, &budget, &TokenCounter::Heuristic);
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].sentences.len(), 10);
        assert_eq!(chunks[0].token_count, 1000);
        assert!(!chunks[0].truncated);
    }

    #[test]
    fn pack_splits_ten_ten_ten() {
        let sentences: Vec<String> = (0..30).map(|_| sentence_of_words(75)).collect();
        let budget = TokenBudget::with_window(1024).unwrap();
        let chunks = pack_chunks(&sentences, &budget, &TokenCounter::Heuristic);
        let sizes: Vec<usize> = chunks.iter().map(|c| c.sentences.len()).collect();
        assert_eq!(sizes, vec![10, 10, 10]);
        let flattened: Vec<String> = chunks
            .iter()
            .flat_map(|c| c.sentences.iter().cloned())
            .collect();
        assert_eq!(flattened, sentences);
    }

    #[test]
    fn oversize_sentence_truncated_and_flagged() {
        let sentences = vec![sentence_of_words(2250)]; // ~3000 heuristic tokens
        let budget = TokenBudget::with_window(2048).unwrap();
        let chunks = pack_chunks(&sentences, &budget, &TokenCounter::Heuristic);
        assert_eq!(chunks.len(), 1);
        assert!(chunks[0].truncated);
        assert!(chunks[0].token_count <= 2048 - CHUNK_PROMPT_RESERVE);
    }

    #[test]
    fn short_text_summarized_in_one_round() {
        let budget = TokenBudget::with_window(1024).unwrap();
        let summary = iterative_summarize(
            "d1",
            "A single short sentence.",
            &EchoBackend,
            &budget,
            &TokenCounter::Heuristic,
        )
        .unwrap();
        assert_eq!(summary.text, "A single short sentence.");
        assert_eq!(summary.rounds, 1);
        assert!(!summary.truncated);
    }

    #[test]
    fn first_sentence_stub_converges_quickly() {
        // ~5000 heuristic tokens: 250 sentences of 15 words each.
        let text: String = (0..250)
            .map(|i| format!("Sentence number {i} filler words pad out the length of this line here now."))
            .collect::<Vec<_>>()
            .join(" ");
        let budget = TokenBudget::with_window(1024).unwrap();
        let summary = iterative_summarize(
            "d2",
            &text,
            &FirstSentenceBackend,
            &budget,
            &TokenCounter::Heuristic,
        )
        .unwrap();
        assert!(summary.rounds <= 3, "rounds = {}", summary.rounds);
        assert!(summary.token_count <= 128);
        assert!(!summary.truncated);
    }

    #[test]
    fn echo_stub_hits_max_rounds_and_truncates() {
        let text: String = (0..40)
            .map(|i| format!("Echoed sentence {i} never gets any shorter at all."))
            .collect::<Vec<_>>()
            .join(" ");
        let budget = TokenBudget::with_window(1024).unwrap();
        let counter = TokenCounter::Heuristic;
        assert!(counter.count(&text) > 128);
        let summary = iterative_summarize("d3", &text, &EchoBackend, &budget, &counter).unwrap();
        assert_eq!(summary.rounds, budget.max_rounds);
        assert!(summary.truncated);
        assert!(summary.token_count <= 128);
    }

    #[test]
    fn summaries_jsonl_round_trip() {
        let summaries = vec![
            Summary {
                doc_id: "a".into(),
                text: "Short text.".into(),
                token_count: 3,
                rounds: 1,
                truncated: false,
            },
            Summary {
                doc_id: "b".into(),
                text: "Another.".into(),
                token_count: 2,
                rounds: 3,
                truncated: true,
            },
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_summaries_jsonl(f.path(), &summaries).unwrap();
        let reloaded = read_summaries_jsonl(f.path()).unwrap();
        assert_eq!(summaries, reloaded);
        let store = SummaryStore::new(reloaded);
        assert_eq!(store.get("b").unwrap().rounds, 3);
    }

    #[test]
    fn budget_validation() {
        assert!(TokenBudget::new(16, 8, 4).is_err());
        assert!(TokenBudget::new(1024, 1024, 4).is_err());
        assert!(TokenBudget::new(1024, 128, 0).is_err());
        assert!(TokenBudget::new(2048, 128, 8).is_ok());
    }
}
