//! Legal document store: ingestion, schema checks, persistence and filtering.
//!
//! Each [`CollectionKind`] lives in its own subdirectory of the store root and
//! is persisted as an append-only `documents.jsonl` log. The newest record for
//! an id wins on load; [`CorpusStore::compact`] rewrites the log with one line
//! per live document.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::text::normalize_text;

const LOG_FILE: &str = "documents.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt store log {path} line {line}: {reason}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("unknown collection kind `{0}`")]
    UnknownKind(String),
    #[error("case facts are empty after normalization")]
    EmptyFacts,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectionKind {
    CentralActs,
    StateActs,
    #[serde(rename = "sc_judgments", alias = "supreme_court_judgments")]
    SupremeCourtJudgments,
    #[serde(rename = "hc_judgments", alias = "high_court_judgments")]
    HighCourtJudgments,
}

impl CollectionKind {
    pub const ALL: [CollectionKind; 4] = [
        CollectionKind::CentralActs,
        CollectionKind::StateActs,
        CollectionKind::SupremeCourtJudgments,
        CollectionKind::HighCourtJudgments,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CollectionKind::CentralActs => "central_acts",
            CollectionKind::StateActs => "state_acts",
            CollectionKind::SupremeCourtJudgments => "sc_judgments",
            CollectionKind::HighCourtJudgments => "hc_judgments",
        }
    }

    /// Metadata keys every document of this kind must carry.
    pub fn required_metadata(self) -> &'static [&'static str] {
        match self {
            CollectionKind::CentralActs => &["section_no", "section_title"],
            CollectionKind::StateActs => &["state", "statute", "section_no", "section_title"],
            CollectionKind::SupremeCourtJudgments => &["case_name", "diary_no"],
            CollectionKind::HighCourtJudgments => &["court", "state", "case_no"],
        }
    }

    pub fn is_statute(self) -> bool {
        matches!(self, CollectionKind::CentralActs | CollectionKind::StateActs)
    }
}

impl fmt::Display for CollectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CollectionKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "central_acts" | "centralacts" => Ok(CollectionKind::CentralActs),
            "state_acts" | "stateacts" => Ok(CollectionKind::StateActs),
            "sc_judgments" | "supreme_court_judgments" | "scjudgments" => {
                Ok(CollectionKind::SupremeCourtJudgments)
            }
            "hc_judgments" | "high_court_judgments" | "hcjudgments" => {
                Ok(CollectionKind::HighCourtJudgments)
            }
            _ => Err(CorpusError::UnknownKind(s.to_string())),
        }
    }
}

/// A normalized legal text unit. Immutable once stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub kind: CollectionKind,
    pub text: String,
    pub metadata: BTreeMap<String, String>,
}

/// Input facts of a case to be decided.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseFacts {
    text: String,
    pub filters: Vec<(String, String)>,
}

impl CaseFacts {
    pub fn new(raw: &str) -> Result<Self, CorpusError> {
        let text = normalize_text(raw);
        if text.is_empty() {
            return Err(CorpusError::EmptyFacts);
        }
        Ok(Self {
            text,
            filters: Vec::new(),
        })
    }

    pub fn with_filters(mut self, filters: Vec<(String, String)>) -> Self {
        self.filters = filters;
        self
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// One line of corpus input, before validation.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct RawRecord {
    pub id: Option<String>,
    pub text: Option<String>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: Vec<(usize, String)>,
}

/// Validate and normalize one raw record against a kind's schema.
pub fn validate_record(record: RawRecord, kind: CollectionKind) -> Result<Document, String> {
    let id = match record.id {
        Some(id) if !id.trim().is_empty() => id.trim().to_string(),
        _ => return Err("missing id".to_string()),
    };
    let text = match record.text {
        Some(t) => normalize_text(&t),
        None => return Err("missing text".to_string()),
    };
    if text.is_empty() {
        return Err("missing text".to_string());
    }
    for key in kind.required_metadata() {
        if !record.metadata.contains_key(*key) {
            return Err(format!("missing metadata: {key}"));
        }
    }
    Ok(Document {
        id,
        kind,
        text,
        metadata: record.metadata,
    })
}

/// Parse line-delimited records. Lines that are not valid records are
/// returned as rejections keyed by their 0-based line index.
pub fn parse_records(input: &str) -> Vec<(usize, Result<RawRecord, String>)> {
    input
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            let parsed = serde_json::from_str::<RawRecord>(line)
                .map_err(|e| format!("malformed record: {e}"));
            (i, parsed)
        })
        .collect()
}

/// Document collections, in memory or backed by a store directory.
#[derive(Debug, Default)]
pub struct CorpusStore {
    root: Option<PathBuf>,
    docs: BTreeMap<String, Arc<Document>>,
}

impl CorpusStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open (or create) a store directory and replay its logs.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let mut docs = BTreeMap::new();
        for kind in CollectionKind::ALL {
            let log = root.join(kind.as_str()).join(LOG_FILE);
            if !log.exists() {
                continue;
            }
            let file = File::open(&log).map_err(io_err(&log))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(io_err(&log))?;
                if line.trim().is_empty() {
                    continue;
                }
                let doc: Document =
                    serde_json::from_str(&line).map_err(|e| CorpusError::CorruptLog {
                        path: log.clone(),
                        line: i + 1,
                        reason: e.to_string(),
                    })?;
                docs.insert(doc.id.clone(), Arc::new(doc));
            }
        }
        Ok(Self {
            root: Some(root),
            docs,
        })
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Arc<Document>> {
        self.docs.get(id)
    }

    /// All documents in id order.
    pub fn documents(&self) -> impl Iterator<Item = &Arc<Document>> {
        self.docs.values()
    }

    pub fn documents_of(&self, kind: CollectionKind) -> impl Iterator<Item = &Arc<Document>> {
        self.docs.values().filter(move |d| d.kind == kind)
    }

    /// Validate, normalize and persist records. Re-ingesting an id replaces
    /// the stored document.
    pub fn ingest<I>(&mut self, records: I, kind: CollectionKind) -> Result<IngestReport, CorpusError>
    where
        I: IntoIterator<Item = (usize, Result<RawRecord, String>)>,
    {
        let mut report = IngestReport::default();
        let mut fresh = Vec::new();
        for (index, record) in records {
            let doc = record.and_then(|r| validate_record(r, kind)).and_then(|doc| {
                match self.docs.get(&doc.id) {
                    Some(existing) if existing.kind != kind => Err(format!(
                        "id {} already stored under {}",
                        doc.id, existing.kind
                    )),
                    _ => Ok(doc),
                }
            });
            match doc {
                Ok(doc) => fresh.push(doc),
                Err(reason) => report.rejected.push((index, reason)),
            }
        }

        if let Some(root) = &self.root {
            let dir = root.join(kind.as_str());
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let log = dir.join(LOG_FILE);
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&log)
                .map_err(io_err(&log))?;
            let mut w = BufWriter::new(file);
            for doc in &fresh {
                let line = serde_json::to_string(doc).expect("document serializes");
                writeln!(w, "{line}").map_err(io_err(&log))?;
            }
            w.flush().map_err(io_err(&log))?;
        }

        report.accepted = fresh.len();
        for doc in fresh {
            self.docs.insert(doc.id.clone(), Arc::new(doc));
        }
        Ok(report)
    }

    /// Parse and ingest line-delimited input.
    pub fn ingest_jsonl(&mut self, input: &str, kind: CollectionKind) -> Result<IngestReport, CorpusError> {
        self.ingest(parse_records(input), kind)
    }

    /// Rewrite every log so it holds exactly one line per stored document.
    pub fn compact(&self) -> Result<(), CorpusError> {
        let Some(root) = &self.root else {
            return Ok(());
        };
        for kind in CollectionKind::ALL {
            let dir = root.join(kind.as_str());
            let log = dir.join(LOG_FILE);
            if !log.exists() {
                continue;
            }
            let tmp = dir.join(format!("{LOG_FILE}.tmp"));
            {
                let file = File::create(&tmp).map_err(io_err(&tmp))?;
                let mut w = BufWriter::new(file);
                for doc in self.documents_of(kind) {
                    let line = serde_json::to_string(doc.as_ref()).expect("document serializes");
                    writeln!(w, "{line}").map_err(io_err(&tmp))?;
                }
                w.flush().map_err(io_err(&tmp))?;
            }
            fs::rename(&tmp, &log).map_err(io_err(&log))?;
        }
        Ok(())
    }

    /// Documents whose metadata matches every `(key, value)` predicate, in id order.
    pub fn filter(&self, predicates: &[(String, String)]) -> Vec<Arc<Document>> {
        self.docs
            .values()
            .filter(|doc| matches_all(doc, predicates))
            .cloned()
            .collect()
    }
}

pub(crate) fn matches_all(doc: &Document, predicates: &[(String, String)]) -> bool {
    predicates
        .iter()
        .all(|(k, v)| doc.metadata.get(k).is_some_and(|have| have == v))
}
