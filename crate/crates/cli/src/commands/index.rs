//! `index`: embed the training summaries and persist the vector index.

use lexchain::chain::embed_cached;
use lexchain::chunking::read_summaries_jsonl;
use lexchain::corpus::Split;
use lexchain::index::{write_vectors_jsonl, EmbeddingIndex, IndexEntry};

use super::{parallel_map, RunContext};
use crate::CliError;

pub fn run(ctx: &RunContext) -> Result<(), CliError> {
    let summaries_path = ctx.summaries_path(Split::Train);
    if !summaries_path.exists() {
        return Err(CliError::Config(format!(
            "{} not found; run `summarize --split train` first",
            summaries_path.display()
        )));
    }
    let summaries = read_summaries_jsonl(&summaries_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", summaries_path.display())))?;
    if summaries.is_empty() {
        return Err(CliError::Config("no training summaries to index".into()));
    }

    // The index must only ever hold training documents; summaries from
    // another split are refused outright.
    for summary in &summaries {
        match ctx.corpus.get(&summary.doc_id) {
            Some(doc) if doc.split == Split::Train => {}
            Some(doc) => {
                return Err(CliError::Config(format!(
                    "summary {} belongs to split {}, not train",
                    summary.doc_id, doc.split
                )))
            }
            None => {
                return Err(CliError::Config(format!(
                    "summary {} is not in the corpus",
                    summary.doc_id
                )))
            }
        }
    }

    let (embedder, embedder_id) = ctx.embedder()?;
    let results = parallel_map(&summaries, ctx.config.workers, |summary| {
        embed_cached(&summary.text, embedder.as_ref(), &embedder_id, Some(&ctx.cache))
            .map(|(vector, hit)| (summary.doc_id.clone(), vector, hit))
    });

    let mut entries = Vec::with_capacity(summaries.len());
    let mut cached = 0usize;
    for result in results {
        match result {
            Ok((doc_id, vector, hit)) => {
                cached += usize::from(hit);
                let label = ctx.corpus.get(&doc_id).expect("checked above").gold.clone();
                entries.push(IndexEntry {
                    doc_id,
                    label,
                    vector,
                });
            }
            Err(e) => return Err(CliError::Backend(format!("embedding failed: {e}"))),
        }
    }

    let vectors_path = ctx.vectors_path();
    write_vectors_jsonl(&vectors_path, &entries)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", vectors_path.display())))?;

    let index = EmbeddingIndex::build(entries, ctx.config.index_mode())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let index_path = ctx.index_path();
    index
        .save(&index_path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", index_path.display())))?;
    eprintln!(
        "index: {} entries, dim {}, {:?} ({cached} embeddings cached) -> {}",
        index.len(),
        index.dim(),
        index.mode(),
        index_path.display()
    );
    Ok(())
}
