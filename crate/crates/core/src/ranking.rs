//! Ranked result lists shared by the dense, lexical and fusion stages.
//!
//! Scores are always "higher is better". Ranks are 1-based and contiguous,
//! scores are non-increasing and ties are ordered by ascending id.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub id: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankedList {
    hits: Vec<ScoredHit>,
}

/// Order by descending score, then ascending id.
pub fn hit_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RankingError {
    #[error("rank {found} at position {position}, expected {expected}")]
    BadRank {
        position: usize,
        expected: usize,
        found: usize,
    },
    #[error("score increases at rank {0}")]
    NotMonotone(usize),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("score for {0} is NaN")]
    NanScore(String),
}

impl RankedList {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Sort `(id, score)` pairs and keep the best `top_k`.
    ///
    /// Ids must be distinct.
    pub fn from_scored(mut scored: Vec<(String, f64)>, top_k: usize) -> Self {
        scored.sort_by(hit_order);
        scored.truncate(top_k);
        Self {
            hits: scored
                .into_iter()
                .enumerate()
                .map(|(i, (id, score))| ScoredHit { id, score, rank: i + 1 })
                .collect(),
        }
    }

    /// Wrap hits that are already ranked, checking the list invariants.
    pub fn from_hits(hits: Vec<ScoredHit>) -> Result<Self, RankingError> {
        let list = Self { hits };
        list.validate()?;
        Ok(list)
    }

    pub fn validate(&self) -> Result<(), RankingError> {
        let mut seen = HashSet::with_capacity(self.hits.len());
        for (i, hit) in self.hits.iter().enumerate() {
            if hit.rank != i + 1 {
                return Err(RankingError::BadRank {
                    position: i,
                    expected: i + 1,
                    found: hit.rank,
                });
            }
            if hit.score.is_nan() {
                return Err(RankingError::NanScore(hit.id.clone()));
            }
            if i > 0 && hit.score > self.hits[i - 1].score {
                return Err(RankingError::NotMonotone(hit.rank));
            }
            if !seen.insert(hit.id.as_str()) {
                return Err(RankingError::DuplicateId(hit.id.clone()));
            }
        }
        Ok(())
    }

    pub fn hits(&self) -> &[ScoredHit] {
        &self.hits
    }

    pub fn into_hits(self) -> Vec<ScoredHit> {
        self.hits
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.id.as_str()).collect()
    }

    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.hits.iter().find(|h| h.id == id).map(|h| h.rank)
    }

    pub fn truncated(mut self, top_k: usize) -> Self {
        self.hits.truncate(top_k);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_scored_orders_and_ranks() {
        let list = RankedList::from_scored(
            vec![("b".into(), 1.0), ("a".into(), 1.0), ("c".into(), 2.0)],
            10,
        );
        assert_eq!(list.ids(), ["c", "a", "b"]);
        assert_eq!(list.hits().iter().map(|h| h.rank).collect::<Vec<_>>(), [1, 2, 3]);
        list.validate().unwrap();
        assert_eq!(RankedList::from_scored(vec![("x".into(), 0.0)], 0).len(), 0);
    }

    #[test]
    fn validation_catches_violations() {
        let hit = |id: &str, score, rank| ScoredHit { id: id.into(), score, rank };
        assert!(matches!(
            RankedList::from_hits(vec![hit("a", 1.0, 2)]),
            Err(RankingError::BadRank { .. })
        ));
        assert_eq!(
            RankedList::from_hits(vec![hit("a", 1.0, 1), hit("b", 2.0, 2)]),
            Err(RankingError::NotMonotone(2))
        );
        assert_eq!(
            RankedList::from_hits(vec![hit("a", 1.0, 1), hit("a", 0.5, 2)]),
            Err(RankingError::DuplicateId("a".into()))
        );
    }
}
