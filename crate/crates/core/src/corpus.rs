//! Dataset ingestion, label normalization, and train/dev/test splits.
//!
//! The canonical input format is JSON Lines with one object per line:
//! `{"id": ..., "text": ..., "label": ..., "split": ...}`. The `label`
//! field is either a single label name or, for the binary task, a list of
//! violated-article identifiers that gets collapsed to YES/NO at load time.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical label identifier. Values are normalized at ingestion, so two
/// equal `LabelId`s always denote the same class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelId(String);

impl LabelId {
    pub fn new(id: impl Into<String>) -> Self {
        LabelId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LabelId {
    fn from(s: &str) -> Self {
        LabelId::new(s)
    }
}

/// Classification task shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Binary,
    Multiclass,
}

/// One label definition: canonical id plus the display name used in prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDef {
    pub id: LabelId,
    pub display: String,
}

impl LabelDef {
    pub fn new(name: &str) -> Self {
        LabelDef {
            id: LabelId::new(name),
            display: name.to_string(),
        }
    }
}

/// Ordered set of labels for one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    task: TaskKind,
    labels: Vec<LabelDef>,
}

/// Issue-area names in their canonical order. "Private Action" is part of
/// the taxonomy but absent from the data, so it is not listed here.
const ISSUE_AREAS: [&str; 13] = [
    "Criminal Procedure",
    "Civil Rights",
    "First Amendment",
    "Due Process",
    "Privacy",
    "Attorneys",
    "Unions",
    "Economic Activity",
    "Judicial Power",
    "Federalism",
    "Interstate Relations",
    "Federal Taxation",
    "Miscellaneous",
];

impl LabelSpace {
    pub fn new(task: TaskKind, labels: Vec<LabelDef>) -> Result<Self, CorpusError> {
        if labels.is_empty() {
            return Err(CorpusError::InvalidLabelSpace(
                "label space must contain at least one label".into(),
            ));
        }
        if task == TaskKind::Binary && labels.len() != 2 {
            return Err(CorpusError::InvalidLabelSpace(format!(
                "binary label space must contain exactly 2 labels, got {}",
                labels.len()
            )));
        }
        let mut seen = HashMap::new();
        for def in &labels {
            if seen
                .insert(def.id.as_str().trim().to_lowercase(), ())
                .is_some()
            {
                return Err(CorpusError::InvalidLabelSpace(format!(
                    "duplicate label {:?}",
                    def.id.as_str()
                )));
            }
        }
        Ok(LabelSpace { task, labels })
    }

    /// Binary violation/no-violation space with options YES and NO.
    pub fn binary_violation() -> Self {
        LabelSpace {
            task: TaskKind::Binary,
            labels: vec![LabelDef::new("YES"), LabelDef::new("NO")],
        }
    }

    /// The 13-label issue-area space for supreme-court opinions.
    pub fn issue_areas() -> Self {
        LabelSpace {
            task: TaskKind::Multiclass,
            labels: ISSUE_AREAS.iter().map(|name| LabelDef::new(name)).collect(),
        }
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn labels(&self) -> &[LabelDef] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, id: &LabelId) -> bool {
        self.labels.iter().any(|def| &def.id == id)
    }

    pub fn display_of(&self, id: &LabelId) -> Option<&str> {
        self.labels
            .iter()
            .find(|def| &def.id == id)
            .map(|def| def.display.as_str())
    }

    /// Resolves a raw label string to its canonical id. Matching trims
    /// whitespace and ignores case, on both id and display name.
    pub fn resolve(&self, raw: &str) -> Option<&LabelId> {
        let needle = raw.trim().to_lowercase();
        self.labels
            .iter()
            .find(|def| {
                def.id.as_str().to_lowercase() == needle
                    || def.display.to_lowercase() == needle
            })
            .map(|def| &def.id)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let file = File::open(path.as_ref())?;
        let parsed: LabelSpace = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| CorpusError::InvalidLabelSpace(e.to_string()))?;
        LabelSpace::new(parsed.task, parsed.labels)
    }
}

/// Corpus partition a document belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn parse(raw: &str) -> Option<Split> {
        match raw.trim().to_lowercase().as_str() {
            "train" => Some(Split::Train),
            "dev" | "development" | "validation" => Some(Split::Dev),
            "test" => Some(Split::Test),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One case: full text, gold label, and split assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(rename = "label")]
    pub gold: LabelId,
    pub split: Split,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: duplicate document id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("invalid document {id:?}: {message}")]
    InvalidDocument { id: String, message: String },
    #[error("invalid label space: {0}")]
    InvalidLabelSpace(String),
    #[error("split {0} has no documents")]
    EmptySplit(Split),
}

/// Collapses a list of violated-article identifiers to a binary label:
/// YES iff any article was violated.
pub fn binarize_articles(raw_labels: &[String]) -> LabelId {
    if raw_labels.iter().any(|l| !l.trim().is_empty()) {
        LabelId::new("YES")
    } else {
        LabelId::new("NO")
    }
}

/// Raw JSONL record. `label` accepts both a single name and an article
/// list; the latter is binarized at load time for binary tasks.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    text: String,
    label: RawLabel,
    split: String,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawLabel {
    Name(String),
    Articles(Vec<String>),
}

/// Immutable document collection with a fixed label space.
#[derive(Debug, Clone)]
pub struct Corpus {
    label_space: LabelSpace,
    documents: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(label_space: LabelSpace, documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            if doc.text.is_empty() {
                return Err(CorpusError::InvalidDocument {
                    id: doc.id.clone(),
                    message: "text is empty".into(),
                });
            }
            if !label_space.contains(&doc.gold) {
                return Err(CorpusError::InvalidDocument {
                    id: doc.id.clone(),
                    message: format!("label {:?} not in label space", doc.gold.as_str()),
                });
            }
            if by_id.insert(doc.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    id: doc.id.clone(),
                });
            }
        }
        Ok(Corpus {
            label_space,
            documents,
            by_id,
        })
    }

    /// Loads a JSON Lines file, resolving labels against `label_space`.
    /// Document order is preserved. Empty lines are not permitted.
    pub fn load_jsonl(
        path: impl AsRef<Path>,
        label_space: LabelSpace,
    ) -> Result<Self, CorpusError> {
        let file = File::open(path.as_ref())?;
        let reader = BufReader::new(file);
        let mut documents = Vec::new();
        let mut by_id: HashMap<String, usize> = HashMap::new();

        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let record: RawRecord =
                serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;

            let gold = match record.label {
                RawLabel::Name(name) => label_space.resolve(&name).cloned().ok_or(
                    CorpusError::UnknownLabel {
                        line: line_no,
                        label: name,
                    },
                )?,
                RawLabel::Articles(articles) => {
                    if label_space.task() != TaskKind::Binary {
                        return Err(CorpusError::Parse {
                            line: line_no,
                            message: "article-list labels are only valid for binary tasks"
                                .into(),
                        });
                    }
                    binarize_articles(&articles)
                }
            };

            let split = Split::parse(&record.split).ok_or_else(|| CorpusError::Parse {
                line: line_no,
                message: format!("unknown split {:?}", record.split),
            })?;

            if record.text.is_empty() {
                return Err(CorpusError::Parse {
                    line: line_no,
                    message: "text is empty".into(),
                });
            }
            if by_id.insert(record.id.clone(), documents.len()).is_some() {
                return Err(CorpusError::DuplicateId {
                    line: line_no,
                    id: record.id,
                });
            }
            documents.push(Document {
                id: record.id,
                text: record.text,
                gold,
                split,
                meta: record.meta,
            });
        }

        Ok(Corpus {
            label_space,
            documents,
            by_id,
        })
    }

    /// Serializes the corpus back to JSON Lines, one document per line in
    /// original order.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let file = File::create(path.as_ref())?;
        let mut writer = BufWriter::new(file);
        for doc in &self.documents {
            serde_json::to_writer(&mut writer, doc).map_err(|e| CorpusError::Parse {
                line: 0,
                message: e.to_string(),
            })?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.documents[i])
    }

    pub fn split_docs(&self, split: Split) -> impl Iterator<Item = &Document> {
        self.documents.iter().filter(move |d| d.split == split)
    }

    /// Gold-label counts for one split. Counts sum to the split size.
    pub fn label_histogram(&self, split: Split) -> Result<BTreeMap<LabelId, usize>, CorpusError> {
        let mut hist = BTreeMap::new();
        let mut total = 0usize;
        for doc in self.split_docs(split) {
            *hist.entry(doc.gold.clone()).or_insert(0) += 1;
            total += 1;
        }
        if total == 0 {
            return Err(CorpusError::EmptySplit(split));
        }
        Ok(hist)
    }

    /// Checks that every split is populated. Intended for full benchmark
    /// corpora; fixtures may legitimately skip splits.
    pub fn validate_complete(&self) -> Result<(), CorpusError> {
        for split in Split::ALL {
            if !self.documents.iter().any(|d| d.split == split) {
                return Err(CorpusError::EmptySplit(split));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f
    }

    #[test]
    fn load_three_line_file() {
        let f = write_temp(&[
            r#"{"id":"a","text":"first case","label":"YES","split":"train"}"#,
            r#"{"id":"b","text":"second case","label":"NO","split":"dev"}"#,
            r#"{"id":"c","text":"third case","label":"YES","split":"test"}"#,
        ]);
        let corpus = Corpus::load_jsonl(f.path(), LabelSpace::binary_violation()).unwrap();
        assert_eq!(corpus.documents().len(), 3);
        assert_eq!(corpus.documents()[0].id, "a");
        assert_eq!(corpus.documents()[2].gold, LabelId::new("YES"));
    }

    #[test]
    fn unknown_label_reports_line() {
        let f = write_temp(&[
            r#"{"id":"a","text":"t","label":"YES","split":"train"}"#,
            r#"{"id":"b","text":"t","label":"MAYBE","split":"train"}"#,
        ]);
        let err = Corpus::load_jsonl(f.path(), LabelSpace::binary_violation()).unwrap_err();
        match err {
            CorpusError::UnknownLabel { line, label } => {
                assert_eq!(line, 2);
                assert_eq!(label, "MAYBE");
            }
            other => panic!("expected UnknownLabel, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let f = write_temp(&[
            r#"{"id":"a","text":"t","label":"YES","split":"train"}"#,
            r#"{"id":"a","text":"u","label":"NO","split":"train"}"#,
        ]);
        let err = Corpus::load_jsonl(f.path(), LabelSpace::binary_violation()).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn malformed_line_reports_line() {
        let f = write_temp(&[
            r#"{"id":"a","text":"t","label":"YES","split":"train"}"#,
            r#"{"id":"b","text":"#,
        ]);
        let err = Corpus::load_jsonl(f.path(), LabelSpace::binary_violation()).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 2, .. }));
    }

    #[test]
    fn labels_match_case_insensitively_after_trim() {
        let f = write_temp(&[r#"{"id":"a","text":"t","label":" yes ","split":"train"}"#]);
        let corpus = Corpus::load_jsonl(f.path(), LabelSpace::binary_violation()).unwrap();
        assert_eq!(corpus.documents()[0].gold, LabelId::new("YES"));
    }

    #[test]
    fn article_lists_binarize_at_load() {
        let f = write_temp(&[
            r#"{"id":"a","text":"t","label":["Article 6"],"split":"train"}"#,
            r#"{"id":"b","text":"t","label":[],"split":"train"}"#,
        ]);
        let corpus = Corpus::load_jsonl(f.path(), LabelSpace::binary_violation()).unwrap();
        assert_eq!(corpus.documents()[0].gold, LabelId::new("YES"));
        assert_eq!(corpus.documents()[1].gold, LabelId::new("NO"));
    }

    #[test]
    fn article_lists_rejected_for_multiclass() {
        let f = write_temp(&[r#"{"id":"a","text":"t","label":["Article 6"],"split":"train"}"#]);
        let err = Corpus::load_jsonl(f.path(), LabelSpace::issue_areas()).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 1, .. }));
    }

    #[test]
    fn binarize_empty_is_no() {
        assert_eq!(binarize_articles(&[]), LabelId::new("NO"));
        assert_eq!(
            binarize_articles(&["Article 6".into()]),
            LabelId::new("YES")
        );
        assert_eq!(
            binarize_articles(&["Article 3".into(), "Article 5".into()]),
            LabelId::new("YES")
        );
    }

    #[test]
    fn histogram_sums_to_split_size() {
        let f = write_temp(&[
            r#"{"id":"a","text":"t","label":"YES","split":"dev"}"#,
            r#"{"id":"b","text":"t","label":"YES","split":"dev"}"#,
            r#"{"id":"c","text":"t","label":"NO","split":"dev"}"#,
            r#"{"id":"d","text":"t","label":"YES","split":"train"}"#,
        ]);
        let corpus = Corpus::load_jsonl(f.path(), LabelSpace::binary_violation()).unwrap();
        let hist = corpus.label_histogram(Split::Dev).unwrap();
        assert_eq!(hist[&LabelId::new("YES")], 2);
        assert_eq!(hist[&LabelId::new("NO")], 1);
        assert_eq!(hist.values().sum::<usize>(), 3);
        assert!(matches!(
            corpus.label_histogram(Split::Test),
            Err(CorpusError::EmptySplit(Split::Test))
        ));
    }

    #[test]
    fn issue_area_shaped_file_with_published_dev_counts() {
        // Dev-split counts from the published label-wise table; the
        // histogram of the loaded corpus must sum to 1400.
        let counts: [(&str, usize); 13] = [
            ("Criminal Procedure", 360),
            ("Federal Taxation", 226),
            ("First Amendment", 218),
            ("Unions", 165),
            ("Economic Activity", 108),
            ("Civil Rights", 83),
            ("Privacy", 70),
            ("Interstate Relations", 51),
            ("Federalism", 38),
            ("Judicial Power", 35),
            ("Attorneys", 22),
            ("Due Process", 14),
            ("Miscellaneous", 10),
        ];
        let mut f = tempfile::NamedTempFile::new().unwrap();
        let mut serial = 0;
        for (label, n) in counts {
            for _ in 0..n {
                serial += 1;
                writeln!(
                    f,
                    r#"{{"id":"c{serial}","text":"Opinion {serial}.","label":"{label}","split":"dev"}}"#
                )
                .unwrap();
            }
        }
        let corpus = Corpus::load_jsonl(f.path(), LabelSpace::issue_areas()).unwrap();
        let hist = corpus.label_histogram(Split::Dev).unwrap();
        assert_eq!(hist.values().sum::<usize>(), 1400);
        assert_eq!(hist[&LabelId::new("Criminal Procedure")], 360);
        assert_eq!(hist[&LabelId::new("Miscellaneous")], 10);
    }

    #[test]
    fn issue_area_space_has_thirteen_labels() {
        let space = LabelSpace::issue_areas();
        assert_eq!(space.len(), 13);
        assert_eq!(space.labels()[0].id, LabelId::new("Criminal Procedure"));
        assert_eq!(space.labels()[12].id, LabelId::new("Miscellaneous"));
        assert!(space.resolve("Private Action").is_none());
        assert_eq!(
            space.resolve("civil rights"),
            Some(&LabelId::new("Civil Rights"))
        );
    }

    #[test]
    fn binary_space_requires_two_labels() {
        let err = LabelSpace::new(TaskKind::Binary, vec![LabelDef::new("YES")]).unwrap_err();
        assert!(matches!(err, CorpusError::InvalidLabelSpace(_)));
    }

    #[test]
    fn jsonl_round_trip_preserves_records() {
        let f = write_temp(&[
            r#"{"id":"a","text":"first case","label":"YES","split":"train","meta":{"year":"1999"}}"#,
            r#"{"id":"b","text":"second case","label":"NO","split":"dev"}"#,
        ]);
        let corpus = Corpus::load_jsonl(f.path(), LabelSpace::binary_violation()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        corpus.write_jsonl(out.path()).unwrap();
        let reloaded = Corpus::load_jsonl(out.path(), LabelSpace::binary_violation()).unwrap();
        assert_eq!(corpus.documents(), reloaded.documents());
    }
}
