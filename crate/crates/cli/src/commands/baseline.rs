//! `baseline`: score a trivial classifier (majority / minority / random)
//! against a split, using training-split class frequencies.

use lexchain::chain::write_predictions_jsonl;
use lexchain::corpus::Split;
use lexchain::evaluation::{baseline, BaselineKind};

use super::{eval, RunContext};
use crate::CliError;

pub fn run(ctx: &RunContext, kind: BaselineKind, split: Split) -> Result<(), CliError> {
    let train_hist = ctx
        .corpus
        .label_histogram(Split::Train)
        .map_err(|e| CliError::Config(format!("training histogram: {e}")))?;
    let doc_ids: Vec<String> = ctx.corpus.split_docs(split).map(|d| d.id.clone()).collect();
    if doc_ids.is_empty() {
        return Err(CliError::Config(format!("split {split} has no documents")));
    }

    let predictions = baseline(kind, &train_hist, ctx.corpus.label_space(), &doc_ids);

    let tag = match kind {
        BaselineKind::Majority => "_baseline_majority".to_string(),
        BaselineKind::Minority => "_baseline_minority".to_string(),
        BaselineKind::Random { .. } => "_baseline_random".to_string(),
    };
    let predictions_path = ctx.out(&format!("predictions{tag}_{split}.jsonl"));
    write_predictions_jsonl(&predictions_path, &predictions)
        .map_err(|e| CliError::Config(format!("{}: {e}", predictions_path.display())))?;

    eval::evaluate(ctx, split, &predictions, None, &tag)?;
    Ok(())
}
