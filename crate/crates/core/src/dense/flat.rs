use super::{IndexError, Metric, VectorSet};
use crate::ranking::RankedList;

/// Exact top-k by metric; ties broken by ascending id.
pub fn search_flat(vectors: &VectorSet, metric: Metric, query: &[f32], top_k: usize) -> Result<RankedList, IndexError> {
    if vectors.is_empty() {
        return Ok(RankedList::empty());
    }
    vectors.check_query(query)?;
    Ok(vectors.rank_positions(metric, query, 0..vectors.len(), top_k))
}

#[derive(Debug, Clone)]
pub struct FlatIndex {
    vectors: VectorSet,
    metric: Metric,
}

impl FlatIndex {
    pub fn new(vectors: VectorSet, metric: Metric) -> Self {
        Self { vectors, metric }
    }

    pub fn search(&self, query: &[f32], top_k: usize) -> Result<RankedList, IndexError> {
        search_flat(&self.vectors, self.metric, query, top_k)
    }

    pub fn vectors(&self) -> &VectorSet {
        &self.vectors
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_query_scores_zero_in_id_order() {
        let mut set = VectorSet::new(3);
        set.push("c", &[0.0, 1.0, 0.0]).unwrap();
        set.push("a", &[0.0, 0.0, 1.0]).unwrap();
        set.push("b", &[0.0, 0.6, 0.8]).unwrap();
        let hits = search_flat(&set, Metric::Cosine, &[1.0, 0.0, 0.0], 10).unwrap();
        assert_eq!(hits.ids(), ["a", "b", "c"]);
        assert!(hits.hits().iter().all(|h| h.score == 0.0));
    }

    #[test]
    fn hand_computed_dot_products() {
        let mut set = VectorSet::new(2);
        set.push("x", &[1.0, 0.0]).unwrap();
        set.push("y", &[0.6, 0.8]).unwrap();
        set.push("z", &[0.0, 1.0]).unwrap();
        // q = (0.8, 0.6): x·q = 0.8, y·q = 0.96, z·q = 0.6
        let hits = search_flat(&set, Metric::Cosine, &[0.8, 0.6], 3).unwrap();
        assert_eq!(hits.ids(), ["y", "x", "z"]);
        assert!((hits.hits()[0].score - 0.96).abs() < 1e-6);
        assert!((hits.hits()[1].score - 0.8).abs() < 1e-6);
        assert!((hits.hits()[2].score - 0.6).abs() < 1e-6);

        let l2 = search_flat(&set, Metric::L2, &[0.8, 0.6], 2).unwrap();
        assert_eq!(l2.ids(), ["y", "x"]);
        // |y - q| = sqrt(0.04 + 0.04)
        assert!((l2.hits()[0].score + 0.08f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn empty_store_returns_empty() {
        let set = VectorSet::new(4);
        assert!(search_flat(&set, Metric::L2, &[0.0; 4], 5).unwrap().is_empty());
    }
}
