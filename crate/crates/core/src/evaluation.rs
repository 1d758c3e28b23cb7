//! Confusion matrices, micro/macro/weighted metrics, label-wise F1, and
//! the trivial baseline classifiers.
//!
//! Conventions: per-label precision is diagonal over column sum and
//! recall diagonal over row sum, each 0 when its denominator is 0; F1 is
//! 0 when precision and recall are both 0. Micro-F1 equals accuracy for
//! single-label classification. Display rounding is half-up to three
//! decimals; internal values keep full precision.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::Prediction;
use crate::corpus::{Corpus, LabelId, LabelSpace, Split};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction for document {0:?} which is not in the evaluated split")]
    UnknownDoc(String),
    #[error("duplicate prediction for document {0:?}")]
    DuplicatePrediction(String),
    #[error("{missing} of {total} documents have no prediction")]
    MissingPredictions { missing: usize, total: usize },
    #[error("label {0:?} is not in the label space")]
    UnknownLabel(String),
    #[error("subset id {0:?} has no prediction")]
    SubsetUnknownId(String),
    #[error("nothing to evaluate")]
    Empty,
}

/// Gold-by-predicted count grid over a fixed label order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<LabelId>,
    /// Row-major: `counts[gold * n + predicted]`.
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    fn from_pairs(
        labels: Vec<LabelId>,
        pairs: impl IntoIterator<Item = (LabelId, LabelId)>,
    ) -> Result<Self, EvalError> {
        let n = labels.len();
        let position: HashMap<&LabelId, usize> =
            labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
        let mut counts = vec![0u64; n * n];
        let mut total = 0u64;
        for (gold, predicted) in pairs {
            let g = *position
                .get(&gold)
                .ok_or_else(|| EvalError::UnknownLabel(gold.as_str().to_string()))?;
            let p = *position
                .get(&predicted)
                .ok_or_else(|| EvalError::UnknownLabel(predicted.as_str().to_string()))?;
            counts[g * n + p] += 1;
            total += 1;
        }
        if total == 0 {
            return Err(EvalError::Empty);
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    pub fn labels(&self) -> &[LabelId] {
        &self.labels
    }

    pub fn count(&self, gold: usize, predicted: usize) -> u64 {
        self.counts[gold * self.labels.len() + predicted]
    }

    pub fn row_sum(&self, gold: usize) -> u64 {
        (0..self.labels.len()).map(|p| self.count(gold, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.labels.len())
            .map(|g| self.count(g, predicted))
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.count(i, i)).sum()
    }

    /// CSV with gold labels as rows and predicted labels as columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gold\\predicted");
        for label in &self.labels {
            let _ = write!(out, ",{label}");
        }
        out.push('\n');
        for (g, label) in self.labels.iter().enumerate() {
            let _ = write!(out, "{label}");
            for p in 0..self.labels.len() {
                let _ = write!(out, ",{}", self.count(g, p));
            }
            out.push('\n');
        }
        out
    }
}

/// Tallies predictions against the gold labels of one split. Requires an
/// exact one-to-one alignment: every prediction's id in the split, no
/// duplicates, every split document predicted.
pub fn confusion(
    predictions: &[Prediction],
    corpus: &Corpus,
    split: Split,
) -> Result<ConfusionMatrix, EvalError> {
    let golds: HashMap<&str, &LabelId> = corpus
        .split_docs(split)
        .map(|d| (d.id.as_str(), &d.gold))
        .collect();
    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(predictions.len());
    for prediction in predictions {
        let gold = *golds
            .get(prediction.doc_id.as_str())
            .ok_or_else(|| EvalError::UnknownDoc(prediction.doc_id.clone()))?;
        if !seen.insert(prediction.doc_id.as_str()) {
            return Err(EvalError::DuplicatePrediction(prediction.doc_id.clone()));
        }
        pairs.push((gold.clone(), prediction.label.clone()));
    }
    if seen.len() != golds.len() {
        return Err(EvalError::MissingPredictions {
            missing: golds.len() - seen.len(),
            total: golds.len(),
        });
    }
    let labels: Vec<LabelId> = corpus
        .label_space()
        .labels()
        .iter()
        .map(|def| def.id.clone())
        .collect();
    ConfusionMatrix::from_pairs(labels, pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: LabelId,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_label: Vec<LabelScore>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
}

/// Half-up rounding to three decimals for display and table comparison.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0 + 0.5).floor() / 1000.0
}

/// Computes the full report from a confusion matrix.
pub fn score(matrix: &ConfusionMatrix) -> EvalReport {
    let n = matrix.labels().len();
    let total = matrix.total() as f64;
    let mut per_label = Vec::with_capacity(n);
    for i in 0..n {
        let diag = matrix.count(i, i) as f64;
        let col = matrix.col_sum(i) as f64;
        let row = matrix.row_sum(i) as f64;
        let precision = if col == 0.0 { 0.0 } else { diag / col };
        let recall = if row == 0.0 { 0.0 } else { diag / row };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_label.push(LabelScore {
            label: matrix.labels()[i].clone(),
            precision,
            recall,
            f1,
            support: matrix.row_sum(i),
        });
    }
    let k = n as f64;
    let accuracy = matrix.trace() as f64 / total;
    EvalReport {
        macro_precision: per_label.iter().map(|s| s.precision).sum::<f64>() / k,
        macro_recall: per_label.iter().map(|s| s.recall).sum::<f64>() / k,
        macro_f1: per_label.iter().map(|s| s.f1).sum::<f64>() / k,
        micro_f1: accuracy,
        weighted_f1: per_label
            .iter()
            .map(|s| s.f1 * s.support as f64)
            .sum::<f64>()
            / total,
        accuracy,
        per_label,
    }
}

impl EvalReport {
    /// Aligned table mirroring the published column order, plus the
    /// label-wise block sorted by descending support.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>9}  {:>6}  {:>8}  {:>8}  {:>11}  {:>8}",
            "Precision", "Recall", "macro-F1", "micro-F1", "weighted-F1", "Accuracy"
        );
        let _ = writeln!(
            out,
            "{:>9.3}  {:>6.3}  {:>8.3}  {:>8.3}  {:>11.3}  {:>8.3}",
            round3(self.macro_precision),
            round3(self.macro_recall),
            round3(self.macro_f1),
            round3(self.micro_f1),
            round3(self.weighted_f1),
            round3(self.accuracy)
        );
        out.push('\n');
        let width = self
            .per_label
            .iter()
            .map(|s| s.label.as_str().len())
            .max()
            .unwrap_or(5)
            .max(5);
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>6}", "Label", "Support", "F1");
        for entry in labelwise_scores(&self.per_label) {
            let _ = writeln!(
                out,
                "{:<width$}  {:>8}  {:>6.3}",
                entry.label.as_str(),
                entry.support,
                round3(entry.f1)
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelF1 {
    pub label: LabelId,
    pub support: u64,
    pub f1: f64,
}

fn labelwise_scores(per_label: &[LabelScore]) -> Vec<LabelF1> {
    let mut rows: Vec<LabelF1> = per_label
        .iter()
        .map(|s| LabelF1 {
            label: s.label.clone(),
            support: s.support,
            f1: s.f1,
        })
        .collect();
    rows.sort_by_key(|row| std::cmp::Reverse(row.support));
    rows
}

/// Per-label F1 rows sorted by descending support, matching the published
/// table layout. Ties keep label-space order.
pub fn labelwise(matrix: &ConfusionMatrix) -> Vec<LabelF1> {
    labelwise_scores(&score(matrix).per_label)
}

/// Trivial reference classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaselineKind {
    /// Always the most frequent training label (ties: label-space order).
    Majority,
    /// Always the least frequent training label (ties: label-space order).
    Minority,
    /// Per-document uniform draw over the whole label space.
    Random { seed: u64 },
}

/// Emits one prediction per evaluation document. `train_hist` supplies
/// the class frequencies for majority/minority; labels absent from it
/// count as zero.
pub fn baseline(
    kind: BaselineKind,
    train_hist: &BTreeMap<LabelId, usize>,
    space: &LabelSpace,
    eval_doc_ids: &[String],
) -> Vec<Prediction> {
    let constant = |label: LabelId| -> Vec<Prediction> {
        eval_doc_ids
            .iter()
            .map(|id| Prediction {
                doc_id: id.clone(),
                label: label.clone(),
                votes: None,
                parse_fallback: false,
                audit: None,
            })
            .collect()
    };
    // Strictly-greater/strictly-smaller scans so count ties resolve to
    // the first label in label-space order.
    let extremum = |prefer_larger: bool| -> LabelId {
        let mut best: Option<(&LabelId, usize)> = None;
        for def in space.labels() {
            let count = train_hist.get(&def.id).copied().unwrap_or(0);
            let better = match best {
                None => true,
                Some((_, best_count)) => {
                    if prefer_larger {
                        count > best_count
                    } else {
                        count < best_count
                    }
                }
            };
            if better {
                best = Some((&def.id, count));
            }
        }
        best.expect("label space is non-empty").0.clone()
    };
    match kind {
        BaselineKind::Majority => constant(extremum(true)),
        BaselineKind::Minority => constant(extremum(false)),
        BaselineKind::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            eval_doc_ids
                .iter()
                .map(|id| {
                    let pick = rng.gen_range(0..space.len());
                    Prediction {
                        doc_id: id.clone(),
                        label: space.labels()[pick].id.clone(),
                        votes: None,
                        parse_fallback: false,
                        audit: None,
                    }
                })
                .collect()
        }
    }
}

/// Recomputes the report over `ids` only. Every id must have a
/// prediction and a gold label in the split.
pub fn subset_eval(
    predictions: &[Prediction],
    corpus: &Corpus,
    split: Split,
    ids: &[String],
) -> Result<EvalReport, EvalError> {
    let by_id: HashMap<&str, &Prediction> = predictions
        .iter()
        .map(|p| (p.doc_id.as_str(), p))
        .collect();
    let golds: HashMap<&str, &LabelId> = corpus
        .split_docs(split)
        .map(|d| (d.id.as_str(), &d.gold))
        .collect();
    let mut pairs = Vec::with_capacity(ids.len());
    for id in ids {
        let prediction = by_id
            .get(id.as_str())
            .ok_or_else(|| EvalError::SubsetUnknownId(id.clone()))?;
        let gold = golds
            .get(id.as_str())
            .ok_or_else(|| EvalError::UnknownDoc(id.clone()))?;
        pairs.push(((*gold).clone(), prediction.label.clone()));
    }
    let labels: Vec<LabelId> = corpus
        .label_space()
        .labels()
        .iter()
        .map(|def| def.id.clone())
        .collect();
    Ok(score(&ConfusionMatrix::from_pairs(labels, pairs)?))
}
