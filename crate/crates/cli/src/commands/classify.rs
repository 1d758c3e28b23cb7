//! `classify`: run the full chain over a split against the training
//! index, writing predictions, audit bundles, and a failure manifest.

use lexchain::chain::{write_audit_bundles, write_predictions_jsonl, BatchResult, Chain};
use lexchain::chunking::SummaryStore;
use lexchain::corpus::Split;
use lexchain::index::EmbeddingIndex;

use super::RunContext;
use crate::CliError;

pub fn run(ctx: &RunContext, split: Split, limit: Option<usize>) -> Result<BatchResult, CliError> {
    let index_path = ctx.index_path();
    if !index_path.exists() {
        return Err(CliError::Config(format!(
            "{} not found; run `index` first",
            index_path.display()
        )));
    }
    let index = EmbeddingIndex::load(&index_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", index_path.display())))?;

    let train_summaries_path = ctx.summaries_path(Split::Train);
    let train_summaries = SummaryStore::from_jsonl(&train_summaries_path).map_err(|e| {
        CliError::Config(format!("{}: {e}", train_summaries_path.display()))
    })?;

    let backends = ctx.backends()?;
    let chain_config = ctx.config.chain_config()?;
    let template = ctx.classify_template()?;
    let chain = Chain {
        space: ctx.corpus.label_space(),
        index: &index,
        train_summaries: &train_summaries,
        backends: &backends,
        template,
        counter: ctx.config.chain.token_counter,
        config: &chain_config,
        cache: Some(&ctx.cache),
    };

    // Validates the split is non-empty before any backend traffic.
    let selected = ctx.select_docs(split, limit)?.len();
    let batch = chain.run_batch(
        &ctx.corpus,
        split,
        ctx.config.workers,
        limit,
        ctx.config.seed,
    );
    debug_assert_eq!(batch.predictions.len() + batch.failures.len(), selected);

    let predictions_path = ctx.predictions_path(split);
    write_predictions_jsonl(&predictions_path, &batch.predictions)
        .map_err(|e| CliError::Config(format!("{}: {e}", predictions_path.display())))?;
    let audit_dir = ctx.out(&format!("audit/{split}"));
    write_audit_bundles(&audit_dir, &batch.predictions)
        .map_err(|e| CliError::Config(format!("{}: {e}", audit_dir.display())))?;

    if !batch.failures.is_empty() {
        let manifest = ctx.out(&format!("failures_{split}.jsonl"));
        let lines: Vec<String> = batch
            .failures
            .iter()
            .map(|f| serde_json::to_string(f).expect("failure serializes"))
            .collect();
        std::fs::write(&manifest, lines.join("\n") + "\n")
            .map_err(|e| CliError::Config(format!("{}: {e}", manifest.display())))?;
        eprintln!(
            "classify: {} failures recorded in {}",
            batch.failures.len(),
            manifest.display()
        );
    }

    eprintln!(
        "classify: {} predictions for split {split} -> {}",
        batch.predictions.len(),
        predictions_path.display()
    );

    if batch.failure_fraction() > ctx.config.failure_threshold {
        return Err(CliError::Threshold(format!(
            "failure fraction {:.3} exceeds threshold {:.3} ({} of {} documents failed)",
            batch.failure_fraction(),
            ctx.config.failure_threshold,
            batch.failures.len(),
            batch.predictions.len() + batch.failures.len(),
        )));
    }
    Ok(batch)
}
