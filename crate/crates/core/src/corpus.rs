//! Document records, corpus ingestion, and construction of labeled evaluation
//! datasets from subject-heading annotations.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subject headings shipped as the reference scenario: the four most frequent
/// direct children of "Breast Neoplasms" in the abstract collection.
pub const BREAST_NEOPLASMS_LABELS: &str = include_str!("../fixtures/breast_neoplasms_children.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abstract_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subject_labels: Vec<String>,
}

impl DocumentRecord {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        DocumentRecord {
            id: id.into(),
            title: title.into(),
            abstract_text: None,
            body: None,
            subject_labels: Vec::new(),
        }
    }

    pub fn with_abstract(mut self, text: impl Into<String>) -> Self {
        self.abstract_text = Some(text.into());
        self
    }

    pub fn with_body(mut self, text: impl Into<String>) -> Self {
        self.body = Some(text.into());
        self
    }

    pub fn with_labels<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.subject_labels = labels.into_iter().map(Into::into).collect();
        self
    }
}

/// An ordered, id-unique collection of documents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    records: Vec<DocumentRecord>,
    pub provenance: String,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and empty ids or titles.
    pub fn new(records: Vec<DocumentRecord>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.id.trim().is_empty() || r.title.trim().is_empty() {
                return Err(Error::Malformed {
                    line: i + 1,
                    message: "record has an empty id or title".into(),
                });
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: r.id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Corpus {
            records,
            provenance: provenance.into(),
        })
    }

    pub fn records(&self) -> &[DocumentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&DocumentRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Records whose id is in `keep`, in corpus order.
    pub fn subset(&self, keep: &HashSet<String>) -> Corpus {
        Corpus {
            records: self
                .records
                .iter()
                .filter(|r| keep.contains(&r.id))
                .cloned()
                .collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for r in &self.records {
            let line = serde_json::to_string(&RawRecord::from(r))?;
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" | "json" => Some(CorpusFormat::Jsonl),
            "csv" => Some(CorpusFormat::Csv),
            _ => None,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::InvalidParameter(format!("unknown corpus format `{other}`"))),
        }
    }
}

/// On-disk record layout shared by the JSONL and CSV readers.
#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    #[serde(default)]
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default, rename = "abstract", skip_serializing_if = "Option::is_none")]
    abstract_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    body: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    mesh_major: Vec<String>,
}

impl From<&DocumentRecord> for RawRecord {
    fn from(r: &DocumentRecord) -> Self {
        RawRecord {
            id: r.id.clone(),
            title: r.title.clone(),
            abstract_text: r.abstract_text.clone(),
            body: r.body.clone(),
            mesh_major: r.subject_labels.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct CsvRecord {
    #[serde(default)]
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default, rename = "abstract")]
    abstract_text: Option<String>,
    #[serde(default)]
    body: Option<String>,
    #[serde(default)]
    mesh_major: Option<String>,
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.filter(|s| !s.trim().is_empty())
}

/// Result of reading a corpus file.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    /// Records dropped for an empty id or title.
    pub skipped: usize,
}

/// Reads a corpus file. Records with an empty id or title are skipped and
/// counted; duplicate ids and malformed lines are errors.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LoadedCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut builder = IngestBuilder::default();
    match format {
        CorpusFormat::Jsonl => {
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line_no = idx + 1;
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                    line: line_no,
                    message: e.to_string(),
                })?;
                builder.push(raw, line_no)?;
            }
        }
        CorpusFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(file);
            let headers = reader.headers()?.clone();
            let mut record = csv::StringRecord::new();
            loop {
                let more = reader.read_record(&mut record).map_err(|e| Error::Malformed {
                    line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                    message: e.to_string(),
                })?;
                if !more {
                    break;
                }
                let line_no = record.position().map(|p| p.line() as usize).unwrap_or(0);
                let row: CsvRecord = record.deserialize(Some(&headers)).map_err(|e| Error::Malformed {
                    line: line_no,
                    message: e.to_string(),
                })?;
                let labels = row
                    .mesh_major
                    .as_deref()
                    .map(|s| {
                        s.split('|')
                            .map(str::trim)
                            .filter(|l| !l.is_empty())
                            .map(String::from)
                            .collect()
                    })
                    .unwrap_or_default();
                let raw = RawRecord {
                    id: row.id,
                    title: row.title,
                    abstract_text: row.abstract_text,
                    body: row.body,
                    mesh_major: labels,
                };
                builder.push(raw, line_no)?;
            }
        }
    }
    let provenance = format!("{}", path.display());
    Ok(LoadedCorpus {
        corpus: Corpus {
            records: builder.records,
            provenance,
        },
        skipped: builder.skipped,
    })
}

#[derive(Default)]
struct IngestBuilder {
    records: Vec<DocumentRecord>,
    seen: HashSet<String>,
    skipped: usize,
}

impl IngestBuilder {
    fn push(&mut self, raw: RawRecord, line: usize) -> Result<()> {
        let id = raw.id.trim().to_string();
        if id.is_empty() || raw.title.trim().is_empty() {
            self.skipped += 1;
            return Ok(());
        }
        if !self.seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id, line });
        }
        self.records.push(DocumentRecord {
            id,
            title: raw.title,
            abstract_text: non_empty(raw.abstract_text),
            body: non_empty(raw.body),
            subject_labels: raw.mesh_major,
        });
        Ok(())
    }
}

/// Which text fields feed the vectorizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSubset {
    TitleOnly,
    TitleAbstract,
    TitleAbstractBody,
}

impl FieldSubset {
    pub const ALL: [FieldSubset; 3] = [
        FieldSubset::TitleOnly,
        FieldSubset::TitleAbstract,
        FieldSubset::TitleAbstractBody,
    ];

    /// Short row label used in lexical-diversity reports.
    pub fn letter(self) -> &'static str {
        match self {
            FieldSubset::TitleOnly => "(a)",
            FieldSubset::TitleAbstract => "(b)",
            FieldSubset::TitleAbstractBody => "(c)",
        }
    }
}

impl fmt::Display for FieldSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldSubset::TitleOnly => "title_only",
            FieldSubset::TitleAbstract => "title_abstract",
            FieldSubset::TitleAbstractBody => "title_abstract_body",
        })
    }
}

/// Joins the selected fields with single newlines. Absent or blank fields are
/// skipped.
pub fn compose_text(record: &DocumentRecord, subset: FieldSubset) -> String {
    let mut text = record.title.clone();
    let mut append = |field: &Option<String>| {
        if let Some(s) = field.as_deref().filter(|s| !s.trim().is_empty()) {
            text.push('\n');
            text.push_str(s);
        }
    };
    match subset {
        FieldSubset::TitleOnly => {}
        FieldSubset::TitleAbstract => append(&record.abstract_text),
        FieldSubset::TitleAbstractBody => {
            append(&record.abstract_text);
            append(&record.body);
        }
    }
    text
}

/// A corpus stripped of its subject labels plus exactly one ground-truth
/// class per record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    corpus: Corpus,
    truth: HashMap<String, String>,
    classes: Vec<String>,
}

impl LabeledDataset {
    /// Assembles a dataset from a corpus and a truth map, checking that
    /// every record has a class and every class has a member. Class order is
    /// taken from `classes`.
    pub fn from_parts(
        mut corpus: Corpus,
        truth: HashMap<String, String>,
        classes: Vec<String>,
    ) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, got {}",
                classes.len()
            )));
        }
        let class_set: HashSet<&str> = classes.iter().map(String::as_str).collect();
        if class_set.len() != classes.len() {
            return Err(Error::InvalidDataset("class list has duplicates".into()));
        }
        let mut sizes: HashMap<&str, usize> = HashMap::new();
        for r in corpus.records() {
            let class = truth.get(&r.id).ok_or_else(|| {
                Error::InvalidDataset(format!("record `{}` has no class", r.id))
            })?;
            if !class_set.contains(class.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "record `{}` has unknown class `{class}`",
                    r.id
                )));
            }
            *sizes.entry(class.as_str()).or_default() += 1;
        }
        if truth.len() != corpus.len() {
            return Err(Error::InvalidDataset(format!(
                "truth has {} entries for {} records",
                truth.len(),
                corpus.len()
            )));
        }
        if let Some(empty) = classes.iter().find(|c| !sizes.contains_key(c.as_str())) {
            return Err(Error::ClassTooSmall {
                class: empty.clone(),
                size: 0,
                min: 1,
            });
        }
        for r in &mut corpus.records {
            r.subject_labels.clear();
        }
        Ok(LabeledDataset {
            corpus,
            truth,
            classes,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn truth(&self) -> &HashMap<String, String> {
        &self.truth
    }

    pub fn class_of(&self, id: &str) -> Option<&str> {
        self.truth.get(id).map(String::as_str)
    }

    /// Class labels aligned with corpus order.
    pub fn labels(&self) -> Vec<&str> {
        self.corpus
            .records()
            .iter()
            .map(|r| self.truth[&r.id].as_str())
            .collect()
    }

    pub fn class_sizes(&self) -> Vec<(String, usize)> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for c in self.truth.values() {
            *counts.entry(c.as_str()).or_default() += 1;
        }
        self.classes
            .iter()
            .map(|c| (c.clone(), counts.get(c.as_str()).copied().unwrap_or(0)))
            .collect()
    }

    /// Writes the truth sidecar: columns `id`,`class` in corpus order.
    pub fn write_truth(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["id", "class"])?;
        for r in self.corpus.records() {
            w.write_record([r.id.as_str(), self.truth[&r.id].as_str()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads a truth sidecar. Returns the map and the classes in order of first
/// appearance.
pub fn read_truth(path: &Path) -> Result<(HashMap<String, String>, Vec<String>)> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        class: String,
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut truth = HashMap::new();
    let mut classes: Vec<String> = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row?;
        if !classes.contains(&row.class) {
            classes.push(row.class.clone());
        }
        if truth.insert(row.id.clone(), row.class).is_some() {
            return Err(Error::DuplicateId {
                id: row.id,
                line: i + 2,
            });
        }
    }
    Ok((truth, classes))
}

/// Outcome of [`build_labeled_dataset`].
#[derive(Debug, Clone)]
pub struct DatasetBuild {
    pub dataset: LabeledDataset,
    /// Records carrying none of the selected labels.
    pub dropped_unlabeled: usize,
    /// Records carrying two or more of the selected labels.
    pub dropped_multilabel: usize,
}

/// Picks the `k_classes` most frequent candidate labels and keeps the records
/// that carry exactly one of them.
pub fn build_labeled_dataset(
    corpus: &Corpus,
    candidate_labels: &[String],
    k_classes: usize,
    min_class_size: usize,
) -> Result<DatasetBuild> {
    if candidate_labels.is_empty() {
        return Err(Error::InvalidParameter("candidate label list is empty".into()));
    }
    if k_classes < 2 {
        return Err(Error::InvalidParameter(format!(
            "k_classes must be at least 2, got {k_classes}"
        )));
    }

    let mut counts = vec![0usize; candidate_labels.len()];
    for r in corpus.records() {
        for (c, label) in candidate_labels.iter().enumerate() {
            if r.subject_labels.iter().any(|l| l == label) {
                counts[c] += 1;
            }
        }
    }
    let mut order: Vec<usize> = (0..candidate_labels.len()).filter(|&c| counts[c] > 0).collect();
    if order.len() < k_classes {
        return Err(Error::TooFewLabels {
            found: order.len(),
            needed: k_classes,
        });
    }
    // stable sort keeps candidate order among equal counts
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
    order.truncate(k_classes);
    let classes: Vec<String> = order.iter().map(|&c| candidate_labels[c].clone()).collect();

    let mut kept = Vec::new();
    let mut truth = HashMap::new();
    let (mut unlabeled, mut multi) = (0, 0);
    for r in corpus.records() {
        let hits: Vec<&String> = classes
            .iter()
            .filter(|c| r.subject_labels.iter().any(|l| l == *c))
            .collect();
        match hits.as_slice() {
            [] => unlabeled += 1,
            [class] => {
                truth.insert(r.id.clone(), (*class).clone());
                let mut stripped = r.clone();
                stripped.subject_labels.clear();
                kept.push(stripped);
            }
            _ => multi += 1,
        }
    }

    for class in &classes {
        let size = truth.values().filter(|c| *c == class).count();
        if size < min_class_size.max(1) {
            return Err(Error::ClassTooSmall {
                class: class.clone(),
                size,
                min: min_class_size.max(1),
            });
        }
    }

    let corpus = Corpus {
        records: kept,
        provenance: corpus.provenance.clone(),
    };
    Ok(DatasetBuild {
        dataset: LabeledDataset::from_parts(corpus, truth, classes)?,
        dropped_unlabeled: unlabeled,
        dropped_multilabel: multi,
    })
}

/// Parses a label list: one label per line, blank lines and `#` comments
/// ignored.
pub fn parse_label_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}
