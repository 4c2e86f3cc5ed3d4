//! Okapi BM25 over Porter-stemmed terms.
//!
//! ```text
//! score(d, q) = sum over query terms t of
//!     idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(d) / avgdl))
//! idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1)
//! ```
//!
//! Repeated query terms contribute once per occurrence. Corpus statistics
//! always come from the whole index, so scoring a candidate subset gives each
//! member exactly the score it would get in a full scan.

mod persist;
pub mod porter;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::ranking::RankedList;
use crate::text::alnum_tokens;

pub use persist::{POSTINGS_MAGIC, POSTINGS_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum LexicalError {
    #[error("candidate id {0} is not in the lexical index")]
    UnknownCandidate(String),
    #[error("invalid bm25 parameters: {0}")]
    Params(String),
    #[error("postings file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lowercased alphanumeric runs, each Porter-stemmed. Stopwords are kept.
pub fn tokenize_stem(text: &str) -> Vec<String> {
    alnum_tokens(text).iter().map(|t| porter::stem(t)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.6, b: 0.7 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self, LexicalError> {
        if !(k1 > 0.0 && k1.is_finite()) {
            return Err(LexicalError::Params(format!("k1 must be positive, got {k1}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(LexicalError::Params(format!("b must lie in [0, 1], got {b}")));
        }
        Ok(Self { k1, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub segment: u32,
    pub tf: u32,
}

/// Which segments to score.
#[derive(Debug, Clone, Copy)]
pub enum Candidates<'a> {
    All,
    Subset(&'a HashSet<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexicalIndex {
    params: Bm25Params,
    segment_ids: Vec<String>,
    lengths: Vec<u32>,
    avgdl: f64,
    postings: HashMap<String, Vec<Posting>>,
    positions: HashMap<String, u32>,
}

impl LexicalIndex {
    /// Index segments in id order.
    pub fn build(segments: &BTreeMap<String, String>, params: Bm25Params) -> Self {
        Self::build_from_iter(segments.iter().map(|(id, text)| (id.as_str(), text.as_str())), params)
    }

    /// Index segments in the given order. Ids must be distinct.
    pub fn build_from_iter<'a, I>(segments: I, params: Bm25Params) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut segment_ids = Vec::new();
        let mut lengths = Vec::new();
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        for (i, (id, text)) in segments.into_iter().enumerate() {
            let terms = tokenize_stem(text);
            lengths.push(terms.len() as u32);
            segment_ids.push(id.to_string());
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in terms {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting {
                    segment: i as u32,
                    tf: count,
                });
            }
        }
        Self::from_parts(params, segment_ids, lengths, postings)
    }

    pub(crate) fn from_parts(
        params: Bm25Params,
        segment_ids: Vec<String>,
        lengths: Vec<u32>,
        postings: HashMap<String, Vec<Posting>>,
    ) -> Self {
        let avgdl = if lengths.is_empty() {
            0.0
        } else {
            lengths.iter().map(|&l| l as f64).sum::<f64>() / lengths.len() as f64
        };
        let positions = segment_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        Self {
            params,
            segment_ids,
            lengths,
            avgdl,
            postings,
            positions,
        }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn segment_count(&self) -> usize {
        self.segment_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn segment_ids(&self) -> &[String] {
        &self.segment_ids
    }

    pub fn length_of(&self, id: &str) -> Option<u32> {
        self.positions.get(id).map(|&i| self.lengths[i as usize])
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.positions.contains_key(id)
    }

    pub(crate) fn raw_postings(&self) -> &HashMap<String, Vec<Posting>> {
        &self.postings
    }

    pub(crate) fn lengths(&self) -> &[u32] {
        &self.lengths
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.segment_count() as f64;
        let df = self.postings(term).len() as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Rank segments by BM25 against `query`; zero scores are omitted.
    pub fn score(&self, query: &str, candidates: Candidates<'_>, top_k: usize) -> Result<RankedList, LexicalError> {
        let allowed: Option<Vec<bool>> = match candidates {
            Candidates::All => None,
            Candidates::Subset(ids) => {
                let mut mask = vec![false; self.segment_count()];
                let mut sorted: Vec<&String> = ids.iter().collect();
                sorted.sort();
                for id in sorted {
                    let pos = self
                        .positions
                        .get(id)
                        .ok_or_else(|| LexicalError::UnknownCandidate(id.clone()))?;
                    mask[*pos as usize] = true;
                }
                Some(mask)
            }
        };

        let Bm25Params { k1, b } = self.params;
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for term in tokenize_stem(query) {
            let postings = self.postings(&term);
            if postings.is_empty() {
                continue;
            }
            let idf = self.idf(&term);
            for p in postings {
                if allowed.as_ref().is_some_and(|m| !m[p.segment as usize]) {
                    continue;
                }
                let tf = p.tf as f64;
                let len = self.lengths[p.segment as usize] as f64;
                let denom = tf + k1 * (1.0 - b + b * len / self.avgdl);
                *acc.entry(p.segment).or_default() += idf * tf * (k1 + 1.0) / denom;
            }
        }
        let scored = acc
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(seg, s)| (self.segment_ids[seg as usize].clone(), s))
            .collect();
        Ok(RankedList::from_scored(scored, top_k))
    }

    pub fn save(&self, postings_path: &std::path::Path, stats_path: &std::path::Path) -> Result<(), LexicalError> {
        std::fs::write(postings_path, persist::encode(self))?;
        std::fs::write(stats_path, persist::stats_text(self))?;
        Ok(())
    }

    pub fn load(postings_path: &std::path::Path) -> Result<Self, LexicalError> {
        persist::decode(&std::fs::read(postings_path)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        persist::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LexicalError> {
        persist::decode(bytes)
    }

    pub fn stats_text(&self) -> String {
        persist::stats_text(self)
    }
}
