//! `pipeline`: summarize → index → classify → eval in one run.

use lexchain::corpus::Split;

use super::{classify, eval, index, summarize, RunContext};
use crate::CliError;

pub fn run(ctx: &RunContext, split: Split, limit: Option<usize>) -> Result<(), CliError> {
    summarize::run(ctx, Split::Train, None)?;
    index::run(ctx)?;
    let batch = classify::run(ctx, split, limit)?;
    // A limited run predicts a subset, so the evaluation is restricted
    // to the predicted ids rather than demanding full-split alignment.
    let subset_ids: Option<Vec<String>> = limit.map(|_| {
        batch
            .predictions
            .iter()
            .map(|p| p.doc_id.clone())
            .collect()
    });
    eval::evaluate(ctx, split, &batch.predictions, subset_ids.as_deref(), "")?;
    Ok(())
}
