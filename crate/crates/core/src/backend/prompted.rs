//! Summarization via a generation backend and an instruction suffix,
//! for setups without a dedicated summarization service.

use std::sync::Arc;

use super::{BackendError, ChunkSummary, Decoding, GenerateBackend, GenerationRequest, SummarizeBackend};
use crate::chunking::TokenCounter;
use crate::prompting::PromptTemplate;

/// Adapts a generator into a summarizer by rendering the chunk through a
/// template such as `"{input} In summary, "` and decoding greedily.
pub struct PromptedSummarizer {
    generator: Arc<dyn GenerateBackend>,
    template: PromptTemplate,
    summary_target: usize,
}

impl PromptedSummarizer {
    pub fn new(
        generator: Arc<dyn GenerateBackend>,
        template: PromptTemplate,
        summary_target: usize,
    ) -> Result<Self, BackendError> {
        if !template.uses_only_input() {
            return Err(BackendError::Descriptor(format!(
                "summarization template {:?} may only use the {{input}} placeholder",
                template.name()
            )));
        }
        Ok(PromptedSummarizer {
            generator,
            template,
            summary_target,
        })
    }
}

impl SummarizeBackend for PromptedSummarizer {
    fn summarize_chunk(&self, text: &str) -> Result<ChunkSummary, BackendError> {
        let prompt = self
            .template
            .render_input(text)
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        let window = self.generator.context_window();
        let prompt_tokens = TokenCounter::Heuristic.count(&prompt);
        let available = window.saturating_sub(prompt_tokens);
        if available == 0 {
            return Err(BackendError::Budget {
                prompt_tokens,
                max_new_tokens: 1,
                context_window: window,
            });
        }
        let generated = self.generator.generate(&GenerationRequest {
            prompt,
            max_new_tokens: self.summary_target.min(available),
            decoding: Decoding::Greedy,
        })?;
        Ok(ChunkSummary {
            text: generated,
            reported_tokens: None,
        })
    }
}
