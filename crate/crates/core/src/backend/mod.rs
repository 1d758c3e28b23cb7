//! Uniform client abstraction over generation, summarization, and
//! embedding services.
//!
//! Remote backends speak a small JSON-over-HTTP protocol; stub backends
//! are deterministic pure functions so the whole chain can run offline
//! and reproducibly. Every failure maps to exactly one [`BackendError`]
//! class, and no operation ever returns partial output.

mod http;
mod prompted;
mod stub;

pub use http::HttpBackend;
pub use prompted::PromptedSummarizer;
pub use stub::{StubBackend, StubCounters};

/// Stable 64-bit hash of a document id, for deterministic per-document
/// seed derivation.
pub fn doc_hash(id: &str) -> u64 {
    stub::fnv1a_64(id.as_bytes())
}

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunking::TokenCounter;

/// Decoding strategy for a generation call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Decoding {
    /// Deterministic; always picks the highest-probability continuation.
    Greedy,
    /// Stochastic, reproducible for a fixed seed against the stub.
    Sample { temperature: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_new_tokens: usize,
    pub decoding: Decoding,
}

/// What a backend does. One descriptor serves exactly one kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Generate,
    Summarize,
    Embed,
}

impl BackendKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendKind::Generate => "generate",
            BackendKind::Summarize => "summarize",
            BackendKind::Embed => "embed",
        }
    }
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_max_retries() -> u32 {
    3
}

fn default_max_in_flight() -> usize {
    8
}

/// Connection settings for one backend service. `endpoint` is either a
/// URL or the literal `"stub"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub endpoint: String,
    pub context_window: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

impl BackendDescriptor {
    pub fn stub(kind: BackendKind, context_window: usize) -> Self {
        BackendDescriptor {
            kind,
            endpoint: "stub".into(),
            context_window,
            embedding_dim: None,
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            max_in_flight: default_max_in_flight(),
        }
    }

    pub fn stub_embed(context_window: usize, dim: usize) -> Self {
        BackendDescriptor {
            embedding_dim: Some(dim),
            ..BackendDescriptor::stub(BackendKind::Embed, context_window)
        }
    }

    pub fn is_stub(&self) -> bool {
        self.endpoint.trim().eq_ignore_ascii_case("stub")
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    /// A short identity string, used in cache keys so cached stages are
    /// invalidated when the serving backend changes.
    pub fn fingerprint(&self) -> String {
        format!(
            "{}:{}:{}:{}",
            self.kind.as_str(),
            self.endpoint,
            self.context_window,
            self.embedding_dim.unwrap_or(0)
        )
    }

    fn validate(&self) -> Result<(), BackendError> {
        if self.context_window == 0 {
            return Err(BackendError::Descriptor(
                "context_window must be positive".into(),
            ));
        }
        match (self.kind, self.embedding_dim) {
            (BackendKind::Embed, None | Some(0)) => Err(BackendError::Descriptor(
                "embed backends require a positive embedding_dim".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Fixed-length embedding; all values finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, BackendError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BackendError::Protocol(
                "embedding contains non-finite values".into(),
            ));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// One chunk's summary, with the token count the service reported for it
/// when the protocol carries usage data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkSummary {
    pub text: String,
    pub reported_tokens: Option<usize>,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error(
        "prompt of ~{prompt_tokens} tokens plus {max_new_tokens} new tokens exceeds the \
         {context_window}-token window"
    )]
    Budget {
        prompt_tokens: usize,
        max_new_tokens: usize,
        context_window: usize,
    },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("service returned status {status}: {body}")]
    Service { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("descriptor is for {actual} but a {expected} operation was requested")]
    Kind {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("invalid descriptor: {0}")]
    Descriptor(String),
}

/// Label-generation handle.
pub trait GenerateBackend: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<String, BackendError>;
    fn context_window(&self) -> usize;
}

/// Chunk-summarization handle.
pub trait SummarizeBackend: Send + Sync {
    fn summarize_chunk(&self, text: &str) -> Result<ChunkSummary, BackendError>;
}

/// Text-embedding handle.
pub trait EmbedBackend: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError>;
    fn dim(&self) -> usize;
}

/// Client for one descriptor. Shareable across worker threads; remote
/// clients bound their in-flight requests, stubs are pure.
pub enum BackendClient {
    Stub(StubBackend),
    Http(HttpBackend),
}

impl BackendClient {
    /// Builds a client. The environment variables
    /// `LEXCHAIN_<KIND>_ENDPOINT` and `LEXCHAIN_<KIND>_API_KEY` override
    /// the descriptor's endpoint and supply a bearer token.
    pub fn from_descriptor(descriptor: &BackendDescriptor) -> Result<Self, BackendError> {
        let mut descriptor = descriptor.clone();
        let kind_upper = descriptor.kind.as_str().to_uppercase();
        if let Ok(endpoint) = std::env::var(format!("LEXCHAIN_{kind_upper}_ENDPOINT")) {
            descriptor.endpoint = endpoint;
        }
        descriptor.validate()?;
        if descriptor.is_stub() {
            Ok(BackendClient::Stub(StubBackend::new(&descriptor)))
        } else {
            let api_key = std::env::var(format!("LEXCHAIN_{kind_upper}_API_KEY")).ok();
            Ok(BackendClient::Http(HttpBackend::new(&descriptor, api_key)?))
        }
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        match self {
            BackendClient::Stub(b) => b.descriptor(),
            BackendClient::Http(b) => b.descriptor(),
        }
    }

    /// Invocation counters, present on stub clients only.
    pub fn stub_counters(&self) -> Option<std::sync::Arc<StubCounters>> {
        match self {
            BackendClient::Stub(b) => Some(b.counters()),
            BackendClient::Http(_) => None,
        }
    }

    fn check_kind(&self, expected: BackendKind) -> Result<(), BackendError> {
        let actual = self.descriptor().kind;
        if actual != expected {
            return Err(BackendError::Kind {
                expected: expected.as_str(),
                actual: actual.as_str(),
            });
        }
        Ok(())
    }
}

impl GenerateBackend for BackendClient {
    fn generate(&self, req: &GenerationRequest) -> Result<String, BackendError> {
        self.check_kind(BackendKind::Generate)?;
        let window = self.descriptor().context_window;
        let prompt_tokens = TokenCounter::Heuristic.count(&req.prompt);
        if prompt_tokens + req.max_new_tokens > window {
            return Err(BackendError::Budget {
                prompt_tokens,
                max_new_tokens: req.max_new_tokens,
                context_window: window,
            });
        }
        match self {
            BackendClient::Stub(b) => b.generate(req),
            BackendClient::Http(b) => b.generate(req),
        }
    }

    fn context_window(&self) -> usize {
        self.descriptor().context_window
    }
}

impl SummarizeBackend for BackendClient {
    fn summarize_chunk(&self, text: &str) -> Result<ChunkSummary, BackendError> {
        self.check_kind(BackendKind::Summarize)?;
        let window = self.descriptor().context_window;
        let text_tokens = TokenCounter::Heuristic.count(text);
        if text_tokens > window {
            return Err(BackendError::Budget {
                prompt_tokens: text_tokens,
                max_new_tokens: 0,
                context_window: window,
            });
        }
        match self {
            BackendClient::Stub(b) => b.summarize_chunk(text),
            BackendClient::Http(b) => b.summarize_chunk(text),
        }
    }
}

impl EmbedBackend for BackendClient {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        self.check_kind(BackendKind::Embed)?;
        let dim = self.dim();
        let vector = match self {
            BackendClient::Stub(b) => b.embed(text)?,
            BackendClient::Http(b) => b.embed(text)?,
        };
        if vector.dim() != dim {
            return Err(BackendError::Protocol(format!(
                "expected a {dim}-dimensional embedding, got {}",
                vector.dim()
            )));
        }
        Ok(vector)
    }

    fn dim(&self) -> usize {
        self.descriptor().embedding_dim.unwrap_or(0)
    }
}
