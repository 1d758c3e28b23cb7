//! `summarize`: produce the summaries file for one split, resuming from
//! the stage cache.

use lexchain::chain::summarize_cached;
use lexchain::chunking::write_summaries_jsonl;
use lexchain::corpus::Split;

use super::{parallel_map, RunContext};
use crate::CliError;

#[derive(serde::Serialize)]
struct SummarizeFailure {
    doc_id: String,
    message: String,
}

pub fn run(ctx: &RunContext, split: Split, limit: Option<usize>) -> Result<(), CliError> {
    let (backend, backend_id) = ctx.summarizer()?;
    let budget = ctx.config.token_budget()?;
    let counter = ctx.config.chain.token_counter;
    let docs = ctx.select_docs(split, limit)?;

    let results = parallel_map(&docs, ctx.config.workers, |doc| {
        summarize_cached(
            &doc.id,
            &doc.text,
            backend.as_ref(),
            &backend_id,
            &budget,
            &counter,
            Some(&ctx.cache),
        )
    });

    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    let mut cached = 0usize;
    for (doc, result) in docs.iter().zip(results) {
        match result {
            Ok((summary, hit)) => {
                cached += usize::from(hit);
                summaries.push(summary);
            }
            Err(e) => failures.push(SummarizeFailure {
                doc_id: doc.id.clone(),
                message: e.to_string(),
            }),
        }
    }

    if !failures.is_empty() {
        let manifest = ctx.out(&format!("failures_summarize_{split}.jsonl"));
        let lines: Vec<String> = failures
            .iter()
            .map(|f| serde_json::to_string(f).expect("failure serializes"))
            .collect();
        std::fs::write(&manifest, lines.join("\n") + "\n")
            .map_err(|e| CliError::Backend(format!("cannot write failure manifest: {e}")))?;
        return Err(CliError::Backend(format!(
            "{} of {} documents failed to summarize; manifest at {}",
            failures.len(),
            docs.len(),
            manifest.display()
        )));
    }

    let path = ctx.summaries_path(split);
    write_summaries_jsonl(&path, &summaries)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    eprintln!(
        "summarize: {} summaries for split {split} ({cached} cached, {} computed) -> {}",
        summaries.len(),
        summaries.len() - cached,
        path.display()
    );
    Ok(())
}
