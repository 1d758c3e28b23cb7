//! Prompt assembly: summarization-step templates and the few-shot
//! classification prompt with neighbor-restricted label options.
//!
//! Rendering is deterministic and byte-stable. The classification layout
//! is fixed: exemplars as `Text:/Label:` pairs (most similar last), an
//! `Options:` line, and the target as `Text: ...\nLabel:` awaiting the
//! completion.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunking::{Chunk, Summary, TokenCounter};
use crate::corpus::{LabelId, LabelSpace, TaskKind};
use crate::index::NeighborHit;

/// Tokens reserved from the generation window for the label completion.
pub const GENERATION_RESERVE: usize = 16;

/// Upper bound on exemplars per prompt.
pub const MAX_EXEMPLARS: usize = 8;

const ALLOWED_PLACEHOLDERS: [&str; 4] = ["input", "exemplars", "options", "target"];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template {name:?}: unknown placeholder {{{placeholder}}}")]
    UnknownPlaceholder { name: String, placeholder: String },
    #[error("template {name:?}: unresolved placeholder {{{placeholder}}}")]
    Unresolved { name: String, placeholder: String },
    #[error("template {name:?} must use exactly the {{input}} placeholder")]
    NotAnInputTemplate { name: String },
    #[error("no neighbors supplied")]
    NoNeighbors,
    #[error("{0} neighbors supplied, maximum is {MAX_EXEMPLARS}")]
    TooManyNeighbors(usize),
    #[error(
        "prompt of {token_count} tokens plus the {GENERATION_RESERVE}-token generation reserve \
         cannot fit a {window}-token window even with zero exemplars"
    )]
    Budget { token_count: usize, window: usize },
    #[error("template file: {0}")]
    TemplateFile(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
}

/// Template with `{placeholder}` slots from the allowed set. Placeholder
/// syntax is `{` + lowercase name + `}`; anything else is literal text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    name: String,
    body: String,
}

/// `(start_byte, end_byte, name)` of each placeholder occurrence.
fn scan_placeholders(body: &str) -> Vec<(usize, usize, &str)> {
    let mut found = Vec::new();
    let mut rest = body;
    let mut offset = 0;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                let end = open + 1 + close + 1;
                if !name.is_empty()
                    && name
                        .chars()
                        .all(|c| c.is_ascii_lowercase() || c == '_')
                {
                    found.push((offset + open, offset + end, name));
                }
                offset += end;
                rest = &rest[end..];
            }
            None => break,
        }
    }
    found
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Result<Self, PromptError> {
        let name = name.into();
        let body = body.into();
        for (_, _, placeholder) in scan_placeholders(&body) {
            if !ALLOWED_PLACEHOLDERS.contains(&placeholder) {
                return Err(PromptError::UnknownPlaceholder {
                    name,
                    placeholder: placeholder.to_string(),
                });
            }
        }
        Ok(PromptTemplate { name, body })
    }

    /// `"{input} In summary, "` — note the trailing space.
    pub fn in_summary() -> Self {
        PromptTemplate {
            name: "in_summary".into(),
            body: "{input} In summary, ".into(),
        }
    }

    /// `"{input} TLDR: "` — note the trailing space.
    pub fn tldr() -> Self {
        PromptTemplate {
            name: "tldr".into(),
            body: "{input} TLDR: ".into(),
        }
    }

    /// Canonical classification layout.
    pub fn classify_default() -> Self {
        PromptTemplate {
            name: "classify".into(),
            body: "{exemplars}Options: {options}\nText: {target}\nLabel:".into(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Distinct placeholder names in order of first occurrence.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut names = Vec::new();
        for (_, _, name) in scan_placeholders(&self.body) {
            if !names.contains(&name) {
                names.push(name);
            }
        }
        names
    }

    pub fn uses_only_input(&self) -> bool {
        self.placeholders() == ["input"]
    }

    /// Single-pass substitution: values are inserted verbatim and never
    /// re-scanned, and every placeholder must have a value.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, PromptError> {
        let spans = scan_placeholders(&self.body);
        let mut out = String::with_capacity(self.body.len());
        let mut cursor = 0;
        for (start, end, name) in spans {
            out.push_str(&self.body[cursor..start]);
            let value = values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| PromptError::Unresolved {
                    name: self.name.clone(),
                    placeholder: name.to_string(),
                })?;
            out.push_str(value);
            cursor = end;
        }
        out.push_str(&self.body[cursor..]);
        Ok(out)
    }

    pub fn render_input(&self, input: &str) -> Result<String, PromptError> {
        if !self.uses_only_input() {
            return Err(PromptError::NotAnInputTemplate {
                name: self.name.clone(),
            });
        }
        self.render(&[("input", input)])
    }
}

/// Renders a summarization prompt. The template may use only `{input}`;
/// the chunk text is substituted verbatim and the template's suffix (and
/// any trailing space) is preserved exactly.
pub fn render_summarization_prompt(
    chunk: &Chunk,
    template: &PromptTemplate,
) -> Result<String, PromptError> {
    template.render_input(&chunk.text())
}

/// Label options offered to the model, given the retrieved neighbors.
/// Multiclass tasks restrict to the neighbors' distinct labels, ordered
/// by descending frequency with ties by first occurrence. Binary tasks
/// always offer both labels in label-space order.
pub fn restrict_labels(neighbors: &[NeighborHit], space: &LabelSpace) -> Vec<LabelId> {
    if space.task() == TaskKind::Binary {
        return space.labels().iter().map(|def| def.id.clone()).collect();
    }
    let mut tally: Vec<(LabelId, usize)> = Vec::new();
    for hit in neighbors {
        match tally.iter_mut().find(|(label, _)| label == &hit.label) {
            Some((_, count)) => *count += 1,
            None => tally.push((hit.label.clone(), 1)),
        }
    }
    // Stable sort keeps first-occurrence order within equal counts.
    tally.sort_by(|(_, a), (_, b)| b.cmp(a));
    tally.into_iter().map(|(label, _)| label).collect()
}

/// One retrieved neighbor with its stored summary text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub hit: NeighborHit,
    pub summary: String,
}

/// Exemplar actually included in a rendered prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarRef {
    pub doc_id: String,
    pub label: LabelId,
    pub similarity: f64,
}

/// A rendered few-shot prompt with its token accounting, dumpable as
/// JSON for per-document audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub text: String,
    /// Exemplars in rendered order (least similar first, nearest last).
    pub exemplars_used: Vec<ExemplarRef>,
    pub options: Vec<LabelId>,
    pub token_count: usize,
    pub dropped_exemplars: usize,
}

impl PromptBundle {
    /// The most similar exemplar actually kept in the prompt.
    pub fn nearest(&self) -> Option<&ExemplarRef> {
        self.exemplars_used.last()
    }
}

fn render_bundle_text(
    exemplars: &[&Exemplar],
    options_line: &str,
    target_text: &str,
    template: &PromptTemplate,
) -> Result<String, PromptError> {
    let mut block = String::new();
    for exemplar in exemplars {
        let _ = write!(
            block,
            "Text: {}\nLabel: {}\n",
            exemplar.summary, exemplar.hit.label
        );
    }
    template.render(&[
        ("exemplars", block.as_str()),
        ("options", options_line),
        ("target", target_text),
    ])
}

/// Assembles the few-shot classification prompt. Neighbors are rendered
/// most-similar last, adjacent to the target. When the rendered prompt
/// exceeds `window` minus the generation reserve, exemplars are dropped
/// from the front (least similar first) until it fits; a prompt that
/// cannot fit even with zero exemplars is a budget error.
pub fn build_fewshot(
    target: &Summary,
    neighbors: &[Exemplar],
    space: &LabelSpace,
    template: &PromptTemplate,
    window: usize,
    counter: &TokenCounter,
) -> Result<PromptBundle, PromptError> {
    if neighbors.is_empty() {
        return Err(PromptError::NoNeighbors);
    }
    if neighbors.len() > MAX_EXEMPLARS {
        return Err(PromptError::TooManyNeighbors(neighbors.len()));
    }

    let hits: Vec<NeighborHit> = neighbors.iter().map(|e| e.hit.clone()).collect();
    let options = restrict_labels(&hits, space);
    let options_line = options
        .iter()
        .map(|id| space.display_of(id).unwrap_or(id.as_str()))
        .collect::<Vec<_>>()
        .join(", ");

    // Rendered order: ascending similarity, so the nearest neighbor sits
    // next to the target. Ties keep the retrieval order (which already
    // breaks similarity ties by doc id) reversed.
    let mut ordered: Vec<&Exemplar> = neighbors.iter().collect();
    ordered.sort_by(|a, b| {
        a.hit
            .similarity
            .partial_cmp(&b.hit.similarity)
            .expect("similarities are finite")
    });

    let mut dropped = 0usize;
    loop {
        let text = render_bundle_text(&ordered[dropped..], &options_line, &target.text, template)?;
        let token_count = counter.count(&text);
        if token_count + GENERATION_RESERVE <= window {
            return Ok(PromptBundle {
                text,
                exemplars_used: ordered[dropped..]
                    .iter()
                    .map(|e| ExemplarRef {
                        doc_id: e.hit.doc_id.clone(),
                        label: e.hit.label.clone(),
                        similarity: e.hit.similarity,
                    })
                    .collect(),
                options,
                token_count,
                dropped_exemplars: dropped,
            });
        }
        if dropped == ordered.len() {
            return Err(PromptError::Budget {
                token_count,
                window,
            });
        }
        dropped += 1;
    }
}

/// Named template collection parsed from a plain-text file of
/// `[name]`-headed sections. A section's body is the exact text between
/// headers with trailing blank lines removed.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: Vec<PromptTemplate>,
}

impl TemplateSet {
    /// The built-in templates: `in_summary`, `tldr`, and `classify`.
    pub fn defaults() -> Self {
        TemplateSet {
            templates: vec![
                PromptTemplate::in_summary(),
                PromptTemplate::tldr(),
                PromptTemplate::classify_default(),
            ],
        }
    }

    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut templates = Vec::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        for line in text.lines() {
            let trimmed = line.trim();
            if trimmed.starts_with('[') && trimmed.ends_with(']') {
                if let Some((name, lines)) = current.take() {
                    templates.push(Self::finish_section(name, lines)?);
                }
                current = Some((trimmed[1..trimmed.len() - 1].to_string(), Vec::new()));
            } else if let Some((_, lines)) = current.as_mut() {
                lines.push(line);
            } else if !trimmed.is_empty() {
                return Err(PromptError::TemplateFile(format!(
                    "text before the first [name] header: {trimmed:?}"
                )));
            }
        }
        if let Some((name, lines)) = current.take() {
            templates.push(Self::finish_section(name, lines)?);
        }
        if templates.is_empty() {
            return Err(PromptError::TemplateFile("no templates found".into()));
        }
        Ok(TemplateSet { templates })
    }

    fn finish_section(name: String, mut lines: Vec<&str>) -> Result<PromptTemplate, PromptError> {
        while lines.last().is_some_and(|l| l.trim().is_empty()) {
            lines.pop();
        }
        PromptTemplate::new(name, lines.join("\n"))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| PromptError::TemplateFile(e.to_string()))?;
        Self::parse(&text)
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate, PromptError> {
        self.templates
            .iter()
            .find(|t| t.name() == name)
            .ok_or_else(|| PromptError::UnknownTemplate(name.to_string()))
    }
}
