//! Prompt-chaining pipeline for classifying long documents.
//!
//! The pipeline condenses a document in stages and ends with a few-shot
//! label query against a generation backend:
//!
//! 1. [`chunking`] — sentence segmentation, token-budgeted chunk packing,
//!    and the iterative summarize-until-short loop.
//! 2. [`backend`] — uniform clients for generation, summarization, and
//!    embedding services, plus deterministic stubs for offline runs.
//! 3. [`index`] — embedding store answering k-nearest-neighbor queries by
//!    cosine similarity, exactly or via a random-projection forest.
//! 4. [`prompting`] — few-shot prompt assembly with neighbor-restricted
//!    label options and window-aware exemplar dropping.
//! 5. [`chain`] — per-document orchestration (summarize → retrieve →
//!    prompt → generate → parse) with greedy or self-consistency decoding.
//! 6. [`evaluation`] — confusion matrices, micro/macro/weighted metrics,
//!    label-wise F1, and trivial baseline classifiers.
//!
//! [`corpus`] handles dataset ingestion and label normalization. All
//! stages are deterministic given a seed when run against stub backends.

pub mod backend;
pub mod chain;
pub mod chunking;
pub mod corpus;
pub mod evaluation;
pub mod index;
pub mod prompting;

pub use backend::{BackendClient, BackendDescriptor, BackendError, BackendKind};
pub use chain::{ChainConfig, ChainError, Prediction};
pub use chunking::{Summary, TokenBudget, TokenCounter};
pub use corpus::{Corpus, CorpusError, Document, LabelId, LabelSpace, Split};
pub use evaluation::{ConfusionMatrix, EvalError, EvalReport};
pub use index::{EmbeddingIndex, IndexError, IndexMode, NeighborHit};
pub use prompting::{PromptBundle, PromptError, PromptTemplate};
