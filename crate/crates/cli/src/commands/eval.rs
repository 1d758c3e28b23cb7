//! `eval`: score a predictions file against gold labels, emitting JSON
//! and text reports plus the confusion matrix as CSV.

use std::path::{Path, PathBuf};

use lexchain::chain::{read_predictions_jsonl, Prediction};
use lexchain::corpus::Split;
use lexchain::evaluation::{confusion, score, subset_eval, EvalReport};

use super::RunContext;
use crate::CliError;

pub struct EvalArgs {
    pub split: Split,
    /// Defaults to the run's own predictions file for the split.
    pub predictions: Option<PathBuf>,
    /// Optional file of document ids (one per line) to evaluate instead
    /// of requiring full-split alignment.
    pub subset: Option<PathBuf>,
}

fn read_subset_ids(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("subset file {}: {e}", path.display())))?;
    let ids: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if ids.is_empty() {
        return Err(CliError::Config(format!(
            "subset file {} contains no ids",
            path.display()
        )));
    }
    Ok(ids)
}

pub fn run(ctx: &RunContext, args: &EvalArgs) -> Result<EvalReport, CliError> {
    let predictions_path = args
        .predictions
        .clone()
        .unwrap_or_else(|| ctx.predictions_path(args.split));
    let predictions = read_predictions_jsonl(&predictions_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", predictions_path.display())))?;

    let subset_ids = args.subset.as_deref().map(read_subset_ids).transpose()?;
    evaluate(ctx, args.split, &predictions, subset_ids.as_deref(), "")
}

/// Shared by `eval`, `baseline`, and `pipeline`. `tag` distinguishes
/// output filenames (empty for plain eval).
pub fn evaluate(
    ctx: &RunContext,
    split: Split,
    predictions: &[Prediction],
    subset_ids: Option<&[String]>,
    tag: &str,
) -> Result<EvalReport, CliError> {
    let report = match subset_ids {
        Some(ids) => subset_eval(predictions, &ctx.corpus, split, ids)
            .map_err(|e| CliError::Config(e.to_string()))?,
        None => {
            let matrix = confusion(predictions, &ctx.corpus, split)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let csv_path = ctx.out(&format!("confusion{tag}_{split}.csv"));
            std::fs::write(&csv_path, matrix.to_csv())
                .map_err(|e| CliError::Config(format!("{}: {e}", csv_path.display())))?;
            score(&matrix)
        }
    };

    let json_path = ctx.out(&format!("report{tag}_{split}.json"));
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Config(format!("report serialization: {e}")))?;
    std::fs::write(&json_path, json + "\n")
        .map_err(|e| CliError::Config(format!("{}: {e}", json_path.display())))?;

    let table = report.to_text_table();
    let text_path = ctx.out(&format!("report{tag}_{split}.txt"));
    std::fs::write(&text_path, &table)
        .map_err(|e| CliError::Config(format!("{}: {e}", text_path.display())))?;

    print!("{table}");
    eprintln!("eval: reports -> {}", json_path.display());
    Ok(report)
}
