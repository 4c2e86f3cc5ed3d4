//! Inverted-file index with a k-means coarse quantizer and exact in-cell scan.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{squared_l2, IndexError, Metric, VectorSet};
use crate::ranking::RankedList;

pub const KMEANS_MAX_ITERATIONS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IvfParams {
    pub nlist: usize,
    pub nprobe: usize,
    pub metric: Metric,
    pub seed: u64,
}

impl IvfParams {
    /// nlist=2048, nprobe=10, L2.
    pub fn staged_hybrid() -> Self {
        Self {
            nlist: 2048,
            nprobe: 10,
            metric: Metric::L2,
            seed: 0x5eed,
        }
    }

    /// Shrink the cell count for small collections: at most 2048 cells and
    /// never more than `ceil(sqrt(count))`.
    pub fn scaled_to(mut self, count: usize) -> Self {
        let cap = (count as f64).sqrt().ceil() as usize;
        self.nlist = self.nlist.min(cap.max(1));
        self.nprobe = self.nprobe.min(self.nlist).max(1);
        self
    }
}

#[derive(Debug, Clone)]
pub struct IvfIndex {
    params: IvfParams,
    vectors: VectorSet,
    centroids: Vec<Vec<f32>>,
    cells: Vec<Vec<u32>>,
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest_centroid(centroids: &[Vec<f32>], v: &[f32]) -> usize {
    let mut best = 0;
    let mut best_d = f32::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_l2(centroid, v);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

impl IvfIndex {
    pub fn build(vectors: &VectorSet, params: IvfParams) -> Result<Self, IndexError> {
        let n = vectors.len();
        if n == 0 {
            return Err(IndexError::Empty);
        }
        if params.nlist == 0 {
            return Err(IndexError::Params("nlist must be positive".into()));
        }
        if params.nlist > n {
            return Err(IndexError::TooManyCells {
                nlist: params.nlist,
                count: n,
            });
        }
        if params.nprobe == 0 || params.nprobe > params.nlist {
            return Err(IndexError::BadProbe {
                nprobe: params.nprobe,
                nlist: params.nlist,
            });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut init = rand::seq::index::sample(&mut rng, n, params.nlist).into_vec();
        init.sort_unstable();
        let mut centroids: Vec<Vec<f32>> = init.iter().map(|&i| vectors.vector(i).to_vec()).collect();

        let dim = vectors.dim();
        let mut assignment = vec![usize::MAX; n];
        for _ in 0..KMEANS_MAX_ITERATIONS {
            let mut changed = false;
            for (i, slot) in assignment.iter_mut().enumerate() {
                let c = nearest_centroid(&centroids, vectors.vector(i));
                if *slot != c {
                    *slot = c;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            let mut sums = vec![vec![0.0f64; dim]; params.nlist];
            let mut counts = vec![0usize; params.nlist];
            for (i, &c) in assignment.iter().enumerate() {
                counts[c] += 1;
                for (s, &x) in sums[c].iter_mut().zip(vectors.vector(i)) {
                    *s += x as f64;
                }
            }
            for c in 0..params.nlist {
                // empty cells keep their previous centroid
                if counts[c] > 0 {
                    centroids[c] = sums[c].iter().map(|s| (s / counts[c] as f64) as f32).collect();
                }
            }
        }

        let mut cells = vec![Vec::new(); params.nlist];
        for i in 0..n {
            cells[nearest_centroid(&centroids, vectors.vector(i))].push(i as u32);
        }

        Ok(Self {
            params,
            vectors: vectors.clone(),
            centroids,
            cells,
        })
    }

    pub(crate) fn from_parts(params: IvfParams, vectors: VectorSet, centroids: Vec<Vec<f32>>, cells: Vec<Vec<u32>>) -> Self {
        Self {
            params,
            vectors,
            centroids,
            cells,
        }
    }

    pub fn params(&self) -> &IvfParams {
        &self.params
    }

    pub fn vectors(&self) -> &VectorSet {
        &self.vectors
    }

    pub fn centroids(&self) -> &[Vec<f32>] {
        &self.centroids
    }

    pub fn cells(&self) -> &[Vec<u32>] {
        &self.cells
    }

    /// Cells in probe order for a query: nearest centroid first, ties by index.
    pub fn probe_order(&self, query: &[f32]) -> Vec<usize> {
        let mut order: Vec<(f32, usize)> = self
            .centroids
            .iter()
            .enumerate()
            .map(|(c, centroid)| (squared_l2(centroid, query), c))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.into_iter().map(|(_, c)| c).collect()
    }

    /// Exact scan of the `nprobe` nearest cells.
    pub fn search(&self, query: &[f32], nprobe: usize, top_k: usize) -> Result<RankedList, IndexError> {
        if self.vectors.is_empty() {
            return Ok(RankedList::empty());
        }
        if nprobe == 0 || nprobe > self.params.nlist {
            return Err(IndexError::BadProbe {
                nprobe,
                nlist: self.params.nlist,
            });
        }
        self.vectors.check_query(query)?;
        let members = self
            .probe_order(query)
            .into_iter()
            .take(nprobe)
            .flat_map(|c| self.cells[c].iter().map(|&i| i as usize));
        Ok(self.vectors.rank_positions(self.params.metric, query, members, top_k))
    }
}
