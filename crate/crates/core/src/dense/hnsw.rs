//! Hierarchical navigable small world graph.
//!
//! Nodes draw their top layer from a geometric distribution with
//! normalization factor `1 / ln(M)`. Insertion descends greedily to the
//! node's top layer, then runs a beam search of width `ef_construction` on
//! every layer below and links to the `M` closest candidates. Neighbor lists
//! that overflow (`M` on upper layers, `2M` on layer 0) are pruned to their
//! closest members. The entry point is a node on the highest occupied layer.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{norm, IndexError, Metric, VectorSet};
use crate::embedding::Precision;
use crate::ranking::RankedList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HnswParams {
    pub max_links: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub metric: Metric,
    pub precision: Precision,
    pub seed: u64,
}

impl HnswParams {
    /// M=16, ef_construction=128, ef=128, cosine, fp16 storage.
    pub fn dense_only() -> Self {
        Self {
            max_links: 16,
            ef_construction: 128,
            ef_search: 128,
            metric: Metric::Cosine,
            precision: Precision::Fp16,
            seed: 0x5eed,
        }
    }

    /// M=16, ef_construction=200, L2, fp32 storage.
    pub fn parallel_hybrid() -> Self {
        Self {
            max_links: 16,
            ef_construction: 200,
            ef_search: 128,
            metric: Metric::L2,
            precision: Precision::Fp32,
            seed: 0x5eed,
        }
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        if self.max_links < 2 {
            return Err(IndexError::Params("max_links must be at least 2".into()));
        }
        if self.ef_construction < self.max_links {
            return Err(IndexError::Params("ef_construction must be at least max_links".into()));
        }
        if self.ef_search < 1 {
            return Err(IndexError::Params("ef_search must be at least 1".into()));
        }
        Ok(())
    }

    fn level_mult(&self) -> f64 {
        1.0 / (self.max_links as f64).ln()
    }

    fn max_degree(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.max_links
        } else {
            self.max_links
        }
    }
}

/// Candidate ordered by distance, then node index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f32,
    node: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Epoch-stamped visited set reused across searches.
struct Visited {
    stamps: Vec<u32>,
    epoch: u32,
}

impl Visited {
    fn new(n: usize) -> Self {
        Self {
            stamps: vec![0; n],
            epoch: 0,
        }
    }

    fn reset(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamps.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// Marks `i`; returns false when it was already marked.
    fn insert(&mut self, i: usize) -> bool {
        if self.stamps[i] == self.epoch {
            false
        } else {
            self.stamps[i] = self.epoch;
            true
        }
    }
}

#[derive(Debug, Clone)]
pub struct HnswIndex {
    params: HnswParams,
    vectors: VectorSet,
    /// `links[node][layer]`; a node has `level + 1` layers.
    links: Vec<Vec<Vec<u32>>>,
    entry: Option<u32>,
    max_level: usize,
}

impl HnswIndex {
    /// Build over every vector in insertion order.
    pub fn build(vectors: &VectorSet, params: HnswParams) -> Result<Self, IndexError> {
        params.validate()?;
        if vectors.is_empty() {
            return Err(IndexError::Empty);
        }
        let stored = vectors.quantized(params.precision);
        let n = stored.len();
        let mut index = Self {
            params,
            vectors: stored,
            links: Vec::with_capacity(n),
            entry: None,
            max_level: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mult = params.level_mult();
        let mut visited = Visited::new(n);
        for node in 0..n {
            // u in (0, 1]
            let u: f64 = 1.0 - rng.random::<f64>();
            let level = (-u.ln() * mult).floor() as usize;
            index.insert(node, level, &mut visited);
        }
        Ok(index)
    }

    pub(crate) fn from_parts(
        params: HnswParams,
        vectors: VectorSet,
        links: Vec<Vec<Vec<u32>>>,
        entry: Option<u32>,
        max_level: usize,
    ) -> Self {
        Self {
            params,
            vectors,
            links,
            entry,
            max_level,
        }
    }

    pub fn params(&self) -> &HnswParams {
        &self.params
    }

    pub fn vectors(&self) -> &VectorSet {
        &self.vectors
    }

    pub fn entry_point(&self) -> Option<u32> {
        self.entry
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Neighbor lists of one node, one per layer it occupies.
    pub fn links(&self, node: usize) -> &[Vec<u32>] {
        &self.links[node]
    }

    pub fn level_of(&self, node: usize) -> usize {
        self.links[node].len() - 1
    }

    #[inline]
    fn dist_to_query(&self, query: &[f32], qn: f32, node: u32) -> f32 {
        -self.vectors.score(self.params.metric, query, qn, node as usize)
    }

    #[inline]
    fn dist_between(&self, a: u32, b: u32) -> f32 {
        let va = self.vectors.vector(a as usize);
        -self
            .vectors
            .score(self.params.metric, va, self.vectors.norm_of(a as usize), b as usize)
    }

    fn insert(&mut self, node: usize, level: usize, visited: &mut Visited) {
        self.links.push(vec![Vec::new(); level + 1]);
        let Some(entry) = self.entry else {
            self.entry = Some(node as u32);
            self.max_level = level;
            return;
        };

        let query = self.vectors.vector(node).to_vec();
        let qn = self.vectors.norm_of(node);
        let mut ep = Candidate {
            dist: self.dist_to_query(&query, qn, entry),
            node: entry,
        };
        for layer in (level + 1..=self.max_level).rev() {
            ep = self.greedy_closest(&query, qn, ep, layer);
        }

        let mut entry_points = vec![ep];
        for layer in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(&query, qn, &entry_points, self.params.ef_construction, layer, visited);
            let selected = self.select_neighbors(&found, self.params.max_links);
            self.links[node][layer] = selected.clone();
            let cap = self.params.max_degree(layer);
            for &nb in &selected {
                let list = &mut self.links[nb as usize][layer];
                list.push(node as u32);
                if list.len() > cap {
                    self.prune(nb, layer, cap);
                }
            }
            entry_points = found;
        }

        if level > self.max_level {
            self.max_level = level;
            self.entry = Some(node as u32);
        }
    }

    /// Diversity heuristic: walk candidates closest first and keep one only
    /// if it is nearer to the base than to every neighbor kept so far. Slots
    /// left over are filled with the closest discarded candidates.
    fn select_neighbors(&self, candidates: &[Candidate], cap: usize) -> Vec<u32> {
        let mut kept: Vec<u32> = Vec::with_capacity(cap);
        let mut skipped = Vec::new();
        for c in candidates {
            if kept.len() == cap {
                break;
            }
            if kept.iter().all(|&k| self.dist_between(c.node, k) > c.dist) {
                kept.push(c.node);
            } else {
                skipped.push(c.node);
            }
        }
        let room = cap - kept.len();
        kept.extend(skipped.into_iter().take(room));
        kept
    }

    /// Re-select the neighbors of `node` on `layer` down to `cap`.
    fn prune(&mut self, node: u32, layer: usize, cap: usize) {
        let mut scored: Vec<Candidate> = self.links[node as usize][layer]
            .iter()
            .map(|&nb| Candidate {
                dist: self.dist_between(node, nb),
                node: nb,
            })
            .collect();
        scored.sort();
        self.links[node as usize][layer] = self.select_neighbors(&scored, cap);
    }

    fn greedy_closest(&self, query: &[f32], qn: f32, mut best: Candidate, layer: usize) -> Candidate {
        loop {
            let mut improved = false;
            for &nb in &self.links[best.node as usize][layer] {
                let cand = Candidate {
                    dist: self.dist_to_query(query, qn, nb),
                    node: nb,
                };
                if cand < best {
                    best = cand;
                    improved = true;
                }
            }
            if !improved {
                return best;
            }
        }
    }

    /// Beam search on one layer. Returns up to `ef` nodes, closest first.
    fn search_layer(
        &self,
        query: &[f32],
        qn: f32,
        entry_points: &[Candidate],
        ef: usize,
        layer: usize,
        visited: &mut Visited,
    ) -> Vec<Candidate> {
        visited.reset();
        let mut frontier: BinaryHeap<std::cmp::Reverse<Candidate>> = BinaryHeap::new();
        let mut best: BinaryHeap<Candidate> = BinaryHeap::new();
        for &ep in entry_points {
            if visited.insert(ep.node as usize) {
                frontier.push(std::cmp::Reverse(ep));
                best.push(ep);
            }
        }
        while best.len() > ef {
            best.pop();
        }

        while let Some(std::cmp::Reverse(current)) = frontier.pop() {
            let worst = best.peek().expect("non-empty");
            if current.dist > worst.dist && best.len() >= ef {
                break;
            }
            for &nb in &self.links[current.node as usize][layer] {
                if !visited.insert(nb as usize) {
                    continue;
                }
                let cand = Candidate {
                    dist: self.dist_to_query(query, qn, nb),
                    node: nb,
                };
                if best.len() < ef || cand < *best.peek().expect("non-empty") {
                    frontier.push(std::cmp::Reverse(cand));
                    best.push(cand);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
    }

    /// Approximate top-k with a beam of `max(ef, top_k)` on layer 0.
    pub fn search(&self, query: &[f32], ef: usize, top_k: usize) -> Result<RankedList, IndexError> {
        let Some(entry) = self.entry else {
            return Ok(RankedList::empty());
        };
        self.vectors.check_query(query)?;
        if top_k == 0 {
            return Ok(RankedList::empty());
        }
        let qn = norm(query);
        let mut ep = Candidate {
            dist: self.dist_to_query(query, qn, entry),
            node: entry,
        };
        for layer in (1..=self.max_level).rev() {
            ep = self.greedy_closest(query, qn, ep, layer);
        }
        let mut visited = Visited::new(self.vectors.len());
        let found = self.search_layer(query, qn, &[ep], ef.max(top_k), 0, &mut visited);
        let scored = found
            .into_iter()
            .map(|c| (self.vectors.id(c.node as usize).to_string(), (-c.dist) as f64))
            .collect();
        Ok(RankedList::from_scored(scored, top_k))
    }
}
