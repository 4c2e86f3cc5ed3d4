//! Dense nearest-neighbor indexes: exhaustive flat scan, HNSW and IVF-flat.
//!
//! All indexes score with the same [`Metric::score`] function so that a
//! full-probe IVF search or an exhaustive HNSW walk can be compared to the
//! flat scan bit for bit.

mod flat;
mod hnsw;
mod ivf;
mod persist;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use flat::{search_flat, FlatIndex};
pub use hnsw::{HnswIndex, HnswParams};
pub use ivf::{IvfIndex, IvfParams};
pub use persist::{FORMAT_VERSION, MAGIC};

use crate::embedding::{round_fp16, EmbeddingVector, Precision};
use crate::ranking::RankedList;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("vector {id} has dimension {got}, index expects {expected}")]
    Dimension { id: String, expected: usize, got: usize },
    #[error("duplicate vector id {0}")]
    DuplicateId(String),
    #[error("cannot build an index over zero vectors")]
    Empty,
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("nlist {nlist} exceeds vector count {count}")]
    TooManyCells { nlist: usize, count: usize },
    #[error("nprobe {nprobe} outside 1..={nlist}")]
    BadProbe { nprobe: usize, nlist: usize },
    #[error("query has dimension {got}, index expects {expected}")]
    QueryDimension { expected: usize, got: usize },
    #[error("index file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    L2,
}

impl Metric {
    /// Similarity where higher is better: cosine similarity, or the negated
    /// Euclidean distance.
    #[inline]
    pub fn score(self, query: &[f32], query_norm: f32, v: &[f32], v_norm: f32) -> f32 {
        match self {
            Metric::Cosine => {
                let denom = query_norm * v_norm;
                if denom == 0.0 {
                    0.0
                } else {
                    dot(query, v) / denom
                }
            }
            Metric::L2 => -squared_l2(query, v).sqrt(),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    // Eight independent accumulators keep the loop vectorizable.
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let i = c * 8;
        for k in 0..8 {
            acc[k] += a[i + k] * b[i + k];
        }
    }
    let mut sum: f32 = acc.iter().sum();
    for i in chunks * 8..a.len() {
        sum += a[i] * b[i];
    }
    sum
}

#[inline]
pub(crate) fn squared_l2(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let i = c * 8;
        for k in 0..8 {
            let d = a[i + k] - b[i + k];
            acc[k] += d * d;
        }
    }
    let mut sum: f32 = acc.iter().sum();
    for i in chunks * 8..a.len() {
        let d = a[i] - b[i];
        sum += d * d;
    }
    sum
}

pub(crate) fn norm(v: &[f32]) -> f32 {
    dot(v, v).sqrt()
}

/// Row-major vectors of one dimension, keyed by string id.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    norms: Vec<f32>,
    positions: HashMap<String, usize>,
}

impl VectorSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ids: Vec::new(),
            data: Vec::new(),
            norms: Vec::new(),
            positions: HashMap::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, values: &[f32]) -> Result<(), IndexError> {
        let id = id.into();
        if values.len() != self.dim {
            return Err(IndexError::Dimension {
                id,
                expected: self.dim,
                got: values.len(),
            });
        }
        if self.positions.contains_key(&id) {
            return Err(IndexError::DuplicateId(id));
        }
        self.positions.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(values);
        self.norms.push(norm(values));
        Ok(())
    }

    pub fn from_embeddings<'a, I>(items: I) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = (&'a str, &'a EmbeddingVector)>,
    {
        let mut set = Self::new(crate::embedding::EMBEDDING_DIM);
        for (id, v) in items {
            set.push(id, v.values())?;
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    #[inline]
    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub(crate) fn norm_of(&self, i: usize) -> f32 {
        self.norms[i]
    }

    /// Copy with every component rounded to half precision.
    pub fn quantized(&self, precision: Precision) -> Self {
        match precision {
            Precision::Fp32 => self.clone(),
            Precision::Fp16 => {
                let mut out = Self::new(self.dim);
                for i in 0..self.len() {
                    let q: Vec<f32> = self.vector(i).iter().map(|&x| round_fp16(x)).collect();
                    out.push(self.ids[i].clone(), &q).expect("same shape");
                }
                out
            }
        }
    }

    #[inline]
    pub(crate) fn score(&self, metric: Metric, query: &[f32], query_norm: f32, i: usize) -> f32 {
        metric.score(query, query_norm, self.vector(i), self.norms[i])
    }

    pub(crate) fn check_query(&self, query: &[f32]) -> Result<(), IndexError> {
        if query.len() != self.dim {
            return Err(IndexError::QueryDimension {
                expected: self.dim,
                got: query.len(),
            });
        }
        Ok(())
    }

    /// Rank a subset of positions exactly.
    pub(crate) fn rank_positions<I>(&self, metric: Metric, query: &[f32], positions: I, top_k: usize) -> RankedList
    where
        I: IntoIterator<Item = usize>,
    {
        let qn = norm(query);
        let scored = positions
            .into_iter()
            .map(|i| (self.ids[i].clone(), self.score(metric, query, qn, i) as f64))
            .collect();
        RankedList::from_scored(scored, top_k)
    }
}

/// Any of the three index kinds, with its search-time parameters baked in.
#[derive(Debug, Clone)]
pub enum DenseIndex {
    Flat(FlatIndex),
    Hnsw(HnswIndex),
    Ivf(IvfIndex),
}

impl DenseIndex {
    pub fn search(&self, query: &[f32], top_k: usize) -> Result<RankedList, IndexError> {
        match self {
            DenseIndex::Flat(idx) => idx.search(query, top_k),
            DenseIndex::Hnsw(idx) => idx.search(query, idx.params().ef_search, top_k),
            DenseIndex::Ivf(idx) => idx.search(query, idx.params().nprobe, top_k),
        }
    }

    pub fn len(&self) -> usize {
        self.vectors().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vectors(&self) -> &VectorSet {
        match self {
            DenseIndex::Flat(idx) => idx.vectors(),
            DenseIndex::Hnsw(idx) => idx.vectors(),
            DenseIndex::Ivf(idx) => idx.vectors(),
        }
    }

    pub fn metric(&self) -> Metric {
        match self {
            DenseIndex::Flat(idx) => idx.metric(),
            DenseIndex::Hnsw(idx) => idx.params().metric,
            DenseIndex::Ivf(idx) => idx.params().metric,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            DenseIndex::Flat(_) => "flat",
            DenseIndex::Hnsw(_) => "hnsw",
            DenseIndex::Ivf(_) => "ivf_flat",
        }
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), IndexError> {
        let bytes = persist::encode(self);
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, IndexError> {
        let bytes = std::fs::read(path)?;
        persist::decode(&bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        persist::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        persist::decode(bytes)
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::VectorSet;

    pub fn random_unit_set(n: usize, dim: usize, seed: u64) -> VectorSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = VectorSet::new(dim);
        for i in 0..n {
            set.push(format!("v{i:05}"), &random_unit(&mut rng, dim)).unwrap();
        }
        set
    }

    pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
        let mut v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        crate::embedding::l2_normalize(&mut v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_and_l2_match_naive() {
        let a: Vec<f32> = (0..19).map(|i| i as f32 * 0.5).collect();
        let b: Vec<f32> = (0..19).map(|i| 3.0 - i as f32).collect();
        let naive_dot: f32 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let naive_l2: f32 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!((dot(&a, &b) - naive_dot).abs() < 1e-3);
        assert!((squared_l2(&a, &b) - naive_l2).abs() < 1e-3);
    }

    #[test]
    fn vector_set_rejects_bad_input() {
        let mut set = VectorSet::new(3);
        set.push("a", &[1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(set.push("b", &[1.0]), Err(IndexError::Dimension { .. })));
        assert!(matches!(set.push("a", &[0.0, 1.0, 0.0]), Err(IndexError::DuplicateId(_))));
    }
}
