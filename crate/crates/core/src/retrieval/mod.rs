//! Retrieval topologies over chunked, embedded collections.
//!
//! Documents are split into two groups, statutes (central and state acts)
//! and precedents (supreme and high court judgments). Each group gets its own
//! chunk set, dense index and, for the hybrid topologies, a BM25 index. A run
//! queries every requested group independently and reports statutes first.

mod fusion;
mod topology;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chunking::{rechunk_characters, split_document, Chunk};
use crate::corpus::{matches_all, CaseFacts, CollectionKind, CorpusStore, Document};
use crate::dense::{DenseIndex, HnswIndex, IndexError, IvfIndex, VectorSet};
use crate::embedding::{embed_batch, EmbeddingError, EmbeddingProvider};
use crate::lexical::{Candidates, LexicalError, LexicalIndex};
use crate::ranking::RankedList;
use crate::text::TokenCounter;

pub use fusion::{aggregate_to_documents, label_relevance, rrf_fuse, RelevancePolicy, RRF_K};
pub use topology::{ChunkSpec, PipelineTopology, TopologyKind};

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("chunk {0} has no parent document")]
    OrphanChunk(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no index for {group} under {path}")]
    MissingIndex { group: CollectionGroup, path: PathBuf },
    #[error("document {0} is in the index but not in the store")]
    StaleIndex(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Lexical(#[from] LexicalError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectionGroup {
    Statutes,
    Precedents,
}

impl CollectionGroup {
    pub const ALL: [CollectionGroup; 2] = [CollectionGroup::Statutes, CollectionGroup::Precedents];

    pub fn of(kind: CollectionKind) -> Self {
        if kind.is_statute() {
            CollectionGroup::Statutes
        } else {
            CollectionGroup::Precedents
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CollectionGroup::Statutes => "statutes",
            CollectionGroup::Precedents => "precedents",
        }
    }
}

impl fmt::Display for CollectionGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CollectionGroup {
    type Err = RetrievalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "statutes" => Ok(CollectionGroup::Statutes),
            "precedents" => Ok(CollectionGroup::Precedents),
            other => Err(RetrievalError::Config(format!("unknown collection group {other:?}"))),
        }
    }
}

/// Batch settings used when embedding chunks.
#[derive(Debug, Clone, Copy)]
pub struct EmbedOptions {
    pub batch_size: usize,
    pub max_in_flight: usize,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkEntry {
    pub id: String,
    pub parent_id: String,
    pub token_count: usize,
}

/// Indexes for one collection group under one topology.
#[derive(Debug, Clone)]
pub struct GroupIndex {
    group: CollectionGroup,
    chunks: Vec<ChunkEntry>,
    parent_of: HashMap<String, String>,
    dense: Option<DenseIndex>,
    lexical: Option<LexicalIndex>,
}

fn segment_id(chunk_id: &str, i: usize) -> String {
    format!("{chunk_id}@{i}")
}

fn chunk_of_segment(segment: &str) -> &str {
    segment.rsplit_once('@').map_or(segment, |(c, _)| c)
}

impl GroupIndex {
    pub fn build(
        group: CollectionGroup,
        docs: &[Arc<Document>],
        topology: &PipelineTopology,
        embedder: &dyn EmbeddingProvider,
        counter: &dyn TokenCounter,
        opts: EmbedOptions,
    ) -> Result<Self, RetrievalError> {
        let profile = topology.chunk_spec().profile();
        let chunks: Vec<Chunk> = docs
            .iter()
            .filter(|d| CollectionGroup::of(d.kind) == group)
            .flat_map(|d| split_document(d, &profile, counter))
            .collect();
        let entries: Vec<ChunkEntry> = chunks
            .iter()
            .map(|c| ChunkEntry {
                id: c.chunk_id(),
                parent_id: c.parent_id.clone(),
                token_count: c.token_count,
            })
            .collect();
        if chunks.is_empty() {
            return Ok(Self::from_parts(group, entries, None, None));
        }

        let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
        let vectors = embed_batch(embedder, &texts, opts.batch_size, opts.max_in_flight)?;
        let set = VectorSet::from_embeddings(entries.iter().map(|e| e.id.as_str()).zip(vectors.iter()))?;

        let (dense, lexical) = match topology {
            PipelineTopology::DenseOnly { hnsw, .. } => (DenseIndex::Hnsw(HnswIndex::build(&set, *hnsw)?), None),
            PipelineTopology::StagedHybrid {
                ivf,
                segment_chars,
                segment_overlap,
                bm25,
                ..
            } => {
                let dense = DenseIndex::Ivf(IvfIndex::build(&set, ivf.scaled_to(set.len()))?);
                let mut segments = Vec::new();
                for (entry, chunk) in entries.iter().zip(&chunks) {
                    for (i, seg) in rechunk_characters(&chunk.text, *segment_chars, *segment_overlap)
                        .into_iter()
                        .enumerate()
                    {
                        segments.push((segment_id(&entry.id, i), seg));
                    }
                }
                let lexical =
                    LexicalIndex::build_from_iter(segments.iter().map(|(id, t)| (id.as_str(), t.as_str())), *bm25);
                (dense, Some(lexical))
            }
            PipelineTopology::ParallelHybrid { hnsw, bm25, .. } => {
                let lexical = LexicalIndex::build_from_iter(
                    entries.iter().zip(&chunks).map(|(e, c)| (e.id.as_str(), c.text.as_str())),
                    *bm25,
                );
                (DenseIndex::Hnsw(HnswIndex::build(&set, *hnsw)?), Some(lexical))
            }
        };
        Ok(Self::from_parts(group, entries, Some(dense), lexical))
    }

    fn from_parts(
        group: CollectionGroup,
        chunks: Vec<ChunkEntry>,
        dense: Option<DenseIndex>,
        lexical: Option<LexicalIndex>,
    ) -> Self {
        let parent_of = chunks.iter().map(|c| (c.id.clone(), c.parent_id.clone())).collect();
        Self {
            group,
            chunks,
            parent_of,
            dense,
            lexical,
        }
    }

    pub fn group(&self) -> CollectionGroup {
        self.group
    }

    pub fn chunks(&self) -> &[ChunkEntry] {
        &self.chunks
    }

    pub fn dense(&self) -> Option<&DenseIndex> {
        self.dense.as_ref()
    }

    pub fn lexical(&self) -> Option<&LexicalIndex> {
        self.lexical.as_ref()
    }

    pub fn parent_of(&self) -> &HashMap<String, String> {
        &self.parent_of
    }

    /// Chunk-level rankings produced by the topology, by list name.
    pub fn chunk_lists(
        &self,
        topology: &PipelineTopology,
        query_text: &str,
        query_vector: &[f32],
    ) -> Result<Vec<(String, RankedList)>, RetrievalError> {
        let Some(dense) = &self.dense else {
            return Ok(Vec::new());
        };
        let lexical = || {
            self.lexical
                .as_ref()
                .ok_or_else(|| RetrievalError::Config(format!("{} index has no lexical component", self.group)))
        };
        Ok(match topology {
            PipelineTopology::DenseOnly { top_k, .. } => {
                vec![("dense".to_string(), dense.search(query_vector, *top_k)?)]
            }
            PipelineTopology::StagedHybrid { dense_top_k, .. } => {
                let dense_hits = dense.search(query_vector, *dense_top_k)?;
                let candidates: HashSet<&str> = dense_hits.hits().iter().map(|h| h.id.as_str()).collect();
                let lexical = lexical()?;
                let segments: HashSet<String> = lexical
                    .segment_ids()
                    .iter()
                    .filter(|s| candidates.contains(chunk_of_segment(s)))
                    .cloned()
                    .collect();
                let seg_hits = lexical.score(query_text, Candidates::Subset(&segments), usize::MAX)?;
                let mut best: BTreeMap<&str, f64> = BTreeMap::new();
                for hit in seg_hits.hits() {
                    let slot = best.entry(chunk_of_segment(&hit.id)).or_insert(f64::NEG_INFINITY);
                    *slot = slot.max(hit.score);
                }
                let lexical_hits =
                    RankedList::from_scored(best.into_iter().map(|(c, s)| (c.to_string(), s)).collect(), usize::MAX);
                vec![("dense".to_string(), dense_hits), ("lexical".to_string(), lexical_hits)]
            }
            PipelineTopology::ParallelHybrid {
                dense_top_k,
                lexical_top_k,
                ..
            } => {
                let lexical = lexical()?;
                let (dense_hits, lexical_hits) = std::thread::scope(|s| {
                    let d = s.spawn(|| dense.search(query_vector, *dense_top_k));
                    let l = lexical.score(query_text, Candidates::All, *lexical_top_k);
                    (d.join().expect("dense search panicked"), l)
                });
                vec![("dense".to_string(), dense_hits?), ("lexical".to_string(), lexical_hits?)]
            }
        })
    }

    pub fn save(&self, dir: &Path) -> Result<(), RetrievalError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut lines = String::new();
        for c in &self.chunks {
            lines.push_str(&serde_json::to_string(c).expect("chunk entry serializes"));
            lines.push('\n');
        }
        let path = dir.join(CHUNKS_FILE);
        std::fs::write(&path, lines).map_err(io_err(&path))?;
        let dense_path = dir.join(DENSE_FILE);
        match &self.dense {
            Some(d) => d.save(&dense_path)?,
            None => remove_if_present(&dense_path)?,
        }
        let postings = dir.join(POSTINGS_FILE);
        let stats = dir.join(STATS_FILE);
        match &self.lexical {
            Some(l) => l.save(&postings, &stats)?,
            None => {
                remove_if_present(&postings)?;
                remove_if_present(&stats)?;
            }
        }
        Ok(())
    }

    pub fn load(group: CollectionGroup, dir: &Path) -> Result<Self, RetrievalError> {
        let path = dir.join(CHUNKS_FILE);
        if !path.exists() {
            return Err(RetrievalError::MissingIndex {
                group,
                path: dir.to_path_buf(),
            });
        }
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut chunks = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            chunks.push(serde_json::from_str(line).map_err(|e| RetrievalError::Format {
                path: path.clone(),
                reason: format!("line {}: {e}", i + 1),
            })?);
        }
        let dense_path = dir.join(DENSE_FILE);
        let dense = dense_path.exists().then(|| DenseIndex::load(&dense_path)).transpose()?;
        let postings = dir.join(POSTINGS_FILE);
        let lexical = postings.exists().then(|| LexicalIndex::load(&postings)).transpose()?;
        if dense.is_none() && !chunks.is_empty() {
            return Err(RetrievalError::MissingIndex {
                group,
                path: dense_path,
            });
        }
        Ok(Self::from_parts(group, chunks, dense, lexical))
    }
}

const CHUNKS_FILE: &str = "chunks.jsonl";
const DENSE_FILE: &str = "dense.jrvx";
const POSTINGS_FILE: &str = "lexical.postings";
const STATS_FILE: &str = "lexical.stats";
const TOPOLOGY_FILE: &str = "topology.json";

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RetrievalError + '_ {
    move |source| RetrievalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn remove_if_present(path: &Path) -> Result<(), RetrievalError> {
    match std::fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io_err(path)(e)),
        _ => Ok(()),
    }
}

/// One retrieved document and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedDoc {
    pub id: String,
    pub kind: CollectionKind,
    pub score: f64,
    pub rank: usize,
    pub accepted: bool,
    /// Best rank of any of the document's chunks in each input list.
    pub list_ranks: BTreeMap<String, usize>,
}

/// Result of one topology run over one collection group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedSet {
    pub topology: TopologyKind,
    pub group: CollectionGroup,
    pub lists: BTreeMap<String, RankedList>,
    pub fused: RankedList,
    pub documents: Vec<RetrievedDoc>,
}

impl RetrievedSet {
    pub fn accepted(&self) -> impl Iterator<Item = &RetrievedDoc> {
        self.documents.iter().filter(|d| d.accepted)
    }
}

/// Turn chunk-level lists into a labelled document set.
pub fn assemble_set(
    topology: &PipelineTopology,
    group: CollectionGroup,
    lists: Vec<(String, RankedList)>,
    parent_of: &HashMap<String, String>,
    store: &CorpusStore,
    filters: &[(String, String)],
    policy: &RelevancePolicy,
) -> Result<RetrievedSet, RetrievalError> {
    let fused = match topology {
        PipelineTopology::DenseOnly { .. } => lists.first().map(|(_, l)| l.clone()).unwrap_or_default(),
        PipelineTopology::StagedHybrid { rrf_k, .. } | PipelineTopology::ParallelHybrid { rrf_k, .. } => {
            let ranked: Vec<RankedList> = lists.iter().map(|(_, l)| l.clone()).collect();
            rrf_fuse(&ranked, *rrf_k)
        }
    };
    let mut documents = aggregate_to_documents(&fused, parent_of)?;
    let mut kinds = HashMap::new();
    for hit in documents.hits() {
        let doc = store.get(&hit.id).ok_or_else(|| RetrievalError::StaleIndex(hit.id.clone()))?;
        kinds.insert(hit.id.clone(), doc.kind);
    }
    if !filters.is_empty() {
        let kept = documents
            .hits()
            .iter()
            .filter(|h| store.get(&h.id).is_some_and(|d| matches_all(d, filters)))
            .map(|h| (h.id.clone(), h.score))
            .collect();
        documents = RankedList::from_scored(kept, usize::MAX);
    }

    let mut list_ranks: HashMap<&str, BTreeMap<String, usize>> = HashMap::new();
    for (name, list) in &lists {
        for hit in list.hits() {
            let parent = parent_of
                .get(&hit.id)
                .ok_or_else(|| RetrievalError::OrphanChunk(hit.id.clone()))?;
            let slot = list_ranks.entry(parent.as_str()).or_default().entry(name.clone()).or_insert(hit.rank);
            *slot = (*slot).min(hit.rank);
        }
    }
    let docs = documents
        .hits()
        .iter()
        .map(|h| RetrievedDoc {
            id: h.id.clone(),
            kind: kinds[&h.id],
            score: h.score,
            rank: h.rank,
            accepted: policy.accepts(h.rank, h.score),
            list_ranks: list_ranks.remove(h.id.as_str()).unwrap_or_default(),
        })
        .collect();
    Ok(RetrievedSet {
        topology: topology.kind(),
        group,
        lists: lists.into_iter().collect(),
        fused,
        documents: docs,
    })
}

/// All group indexes for one topology.
#[derive(Debug, Clone)]
pub struct RetrievalIndexes {
    topology: PipelineTopology,
    groups: BTreeMap<CollectionGroup, GroupIndex>,
}

impl RetrievalIndexes {
    pub fn build(
        store: &CorpusStore,
        topology: PipelineTopology,
        embedder: &dyn EmbeddingProvider,
        counter: &dyn TokenCounter,
        opts: EmbedOptions,
    ) -> Result<Self, RetrievalError> {
        topology.validate()?;
        let docs: Vec<Arc<Document>> = store.documents().cloned().collect();
        let mut groups = BTreeMap::new();
        for group in CollectionGroup::ALL {
            groups.insert(group, GroupIndex::build(group, &docs, &topology, embedder, counter, opts)?);
        }
        Ok(Self { topology, groups })
    }

    pub fn topology(&self) -> &PipelineTopology {
        &self.topology
    }

    pub fn group(&self, group: CollectionGroup) -> Option<&GroupIndex> {
        self.groups.get(&group)
    }

    /// Default on-disk location of a topology's indexes inside a store.
    pub fn default_dir(store_root: &Path, kind: TopologyKind) -> PathBuf {
        store_root.join("index").join(kind.as_str())
    }

    pub fn save(&self, dir: &Path) -> Result<(), RetrievalError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(TOPOLOGY_FILE);
        let json = serde_json::to_string_pretty(&self.topology).expect("topology serializes");
        std::fs::write(&path, json + "\n").map_err(io_err(&path))?;
        for (group, index) in &self.groups {
            index.save(&dir.join(group.as_str()))?;
        }
        Ok(())
    }

    /// Load the indexes for `groups`. A missing directory or group is a
    /// configuration error.
    pub fn load(dir: &Path, groups: &[CollectionGroup]) -> Result<Self, RetrievalError> {
        let path = dir.join(TOPOLOGY_FILE);
        if !path.exists() {
            return Err(RetrievalError::MissingIndex {
                group: groups.first().copied().unwrap_or(CollectionGroup::Statutes),
                path: dir.to_path_buf(),
            });
        }
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let topology: PipelineTopology = serde_json::from_str(&text).map_err(|e| RetrievalError::Format {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let mut loaded = BTreeMap::new();
        for &group in groups {
            loaded.insert(group, GroupIndex::load(group, &dir.join(group.as_str()))?);
        }
        Ok(Self {
            topology,
            groups: loaded,
        })
    }

    /// Retrieve for every requested group, statutes first.
    pub fn run(
        &self,
        facts: &CaseFacts,
        store: &CorpusStore,
        embedder: &dyn EmbeddingProvider,
        groups: &[CollectionGroup],
        policy: &RelevancePolicy,
    ) -> Result<Vec<RetrievedSet>, RetrievalError> {
        policy.validate()?;
        let mut wanted: Vec<CollectionGroup> = groups.to_vec();
        wanted.sort();
        wanted.dedup();
        let query = embedder
            .embed(&[facts.text().to_string()])?
            .pop()
            .ok_or(EmbeddingError::BatchLength { expected: 1, got: 0 })?;
        let mut out = Vec::with_capacity(wanted.len());
        for group in wanted {
            let index = self.groups.get(&group).ok_or_else(|| RetrievalError::MissingIndex {
                group,
                path: PathBuf::from(group.as_str()),
            })?;
            let lists = index.chunk_lists(&self.topology, facts.text(), query.values())?;
            out.push(assemble_set(
                &self.topology,
                group,
                lists,
                index.parent_of(),
                store,
                &facts.filters,
                policy,
            )?);
        }
        Ok(out)
    }
}

/// Build indexes over `store` and run one query; convenience for callers
/// that do not persist indexes.
pub fn run_topology(
    topology: PipelineTopology,
    facts: &CaseFacts,
    store: &CorpusStore,
    embedder: &dyn EmbeddingProvider,
    counter: &dyn TokenCounter,
    policy: &RelevancePolicy,
) -> Result<Vec<RetrievedSet>, RetrievalError> {
    let indexes = RetrievalIndexes::build(store, topology, embedder, counter, EmbedOptions::default())?;
    indexes.run(facts, store, embedder, &CollectionGroup::ALL, policy)
}

/// One JSON object per retrieved set, for line-delimited run manifests.
#[derive(Debug, Serialize)]
pub struct RetrievalRecord<'a> {
    pub record: &'static str,
    pub params: &'a PipelineTopology,
    #[serde(flatten)]
    pub set: &'a RetrievedSet,
}

pub fn manifest_lines(topology: &PipelineTopology, sets: &[RetrievedSet]) -> Vec<String> {
    sets.iter()
        .map(|set| {
            serde_json::to_string(&RetrievalRecord {
                record: "retrieval",
                params: topology,
                set,
            })
            .expect("retrieval record serializes")
        })
        .collect()
}
