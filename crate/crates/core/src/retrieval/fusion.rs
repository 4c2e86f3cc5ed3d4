//! Reciprocal rank fusion, chunk-to-document aggregation and relevance labels.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::RetrievalError;
use crate::ranking::RankedList;

pub const RRF_K: usize = 60;

/// Fuse rankings with `score(d) = sum over lists containing d of 1 / (k + rank)`.
///
/// Each item's contributions are summed in ascending rank order, so the
/// result does not depend on the order of `lists`.
pub fn rrf_fuse(lists: &[RankedList], k: usize) -> RankedList {
    let mut ranks: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for list in lists {
        for hit in list.hits() {
            ranks.entry(hit.id.as_str()).or_default().push(hit.rank);
        }
    }
    let scored = ranks
        .into_iter()
        .map(|(id, mut rs)| {
            rs.sort_unstable();
            let score = rs.iter().map(|&r| 1.0 / (k + r) as f64).sum::<f64>();
            (id.to_string(), score)
        })
        .collect();
    RankedList::from_scored(scored, usize::MAX)
}

/// Collapse chunk hits to their parent documents, scoring each document by
/// its best chunk.
pub fn aggregate_to_documents(chunk_hits: &RankedList, parent_of: &HashMap<String, String>) -> Result<RankedList, RetrievalError> {
    let mut best: HashMap<&str, f64> = HashMap::new();
    for hit in chunk_hits.hits() {
        let parent = parent_of
            .get(&hit.id)
            .ok_or_else(|| RetrievalError::OrphanChunk(hit.id.clone()))?;
        let slot = best.entry(parent.as_str()).or_insert(f64::NEG_INFINITY);
        if hit.score > *slot {
            *slot = hit.score;
        }
    }
    let scored = best.into_iter().map(|(id, s)| (id.to_string(), s)).collect();
    Ok(RankedList::from_scored(scored, usize::MAX))
}

/// How a ranked candidate becomes accepted (1) or rejected (0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RelevancePolicy {
    TopK { k: usize },
    Threshold { tau: f64 },
    TopKAndThreshold { k: usize, tau: f64 },
}

impl Default for RelevancePolicy {
    fn default() -> Self {
        RelevancePolicy::TopK { k: 10 }
    }
}

impl RelevancePolicy {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        let (k, tau) = match *self {
            RelevancePolicy::TopK { k } => (Some(k), None),
            RelevancePolicy::Threshold { tau } => (None, Some(tau)),
            RelevancePolicy::TopKAndThreshold { k, tau } => (Some(k), Some(tau)),
        };
        if k == Some(0) {
            return Err(RetrievalError::Config("relevance k must be at least 1".into()));
        }
        if tau.is_some_and(|t| !t.is_finite()) {
            return Err(RetrievalError::Config("relevance threshold must be finite".into()));
        }
        Ok(())
    }

    pub fn accepts(&self, rank: usize, score: f64) -> bool {
        match *self {
            RelevancePolicy::TopK { k } => rank <= k,
            RelevancePolicy::Threshold { tau } => score >= tau,
            RelevancePolicy::TopKAndThreshold { k, tau } => rank <= k && score >= tau,
        }
    }
}

/// Label every candidate in rank order.
pub fn label_relevance(ranked: &RankedList, policy: &RelevancePolicy) -> Vec<(String, u8)> {
    ranked
        .hits()
        .iter()
        .map(|h| (h.id.clone(), policy.accepts(h.rank, h.score) as u8))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::ScoredHit;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn list(ids: &[&str]) -> RankedList {
        let n = ids.len() as f64;
        RankedList::from_hits(
            ids.iter()
                .enumerate()
                .map(|(i, id)| ScoredHit {
                    id: id.to_string(),
                    score: n - i as f64,
                    rank: i + 1,
                })
                .collect(),
        )
        .unwrap()
    }

    fn scored(pairs: &[(&str, f64)]) -> RankedList {
        RankedList::from_scored(pairs.iter().map(|(a, s)| (a.to_string(), *s)).collect(), usize::MAX)
    }

    #[test]
    fn rank_one_and_three() {
        let fused = rrf_fuse(&[list(&["d", "x"]), list(&["y", "z", "d"])], RRF_K);
        let d = fused.hits().iter().find(|h| h.id == "d").unwrap();
        assert!((d.score - (1.0 / 61.0 + 1.0 / 63.0)).abs() < 1e-15);
        assert!((d.score - 0.0322664).abs() < 1e-7);
        assert_eq!(fused.hits()[0].id, "d");
    }

    #[test]
    fn single_list_keeps_order() {
        let l = list(&["c", "a", "b", "e"]);
        assert_eq!(rrf_fuse(&[l.clone()], 60).ids(), l.ids());
        assert_eq!(rrf_fuse(&[l.clone(), l.clone()], 60).ids(), l.ids());
        assert!(rrf_fuse(&[], 60).is_empty());
    }

    fn brute_force(lists: &[Vec<String>], k: usize) -> Vec<(String, f64)> {
        let mut ids: Vec<String> = lists.iter().flatten().cloned().collect();
        ids.sort();
        ids.dedup();
        let mut out: Vec<(String, f64)> = ids
            .into_iter()
            .map(|id| {
                let mut ranks: Vec<usize> = lists
                    .iter()
                    .filter_map(|l| l.iter().position(|x| *x == id).map(|p| p + 1))
                    .collect();
                ranks.sort();
                let s = ranks.iter().fold(0.0, |acc, &r| acc + 1.0 / (k as f64 + r as f64));
                (id, s)
            })
            .collect();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        out
    }

    #[test]
    fn matches_brute_force_and_ignores_list_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n_lists = rng.random_range(1..5);
            let lists: Vec<Vec<String>> = (0..n_lists)
                .map(|_| {
                    let mut pool: Vec<String> = (0..30).map(|i| format!("d{i}")).collect();
                    pool.shuffle(&mut rng);
                    pool.truncate(rng.random_range(0..20));
                    pool
                })
                .collect();
            let ranked: Vec<RankedList> = lists
                .iter()
                .map(|l| list(&l.iter().map(String::as_str).collect::<Vec<_>>()))
                .collect();
            let fused = rrf_fuse(&ranked, RRF_K);
            let oracle = brute_force(&lists, RRF_K);
            assert_eq!(fused.len(), oracle.len());
            for (h, (id, s)) in fused.hits().iter().zip(&oracle) {
                assert_eq!(&h.id, id);
                assert!((h.score - s).abs() <= 1e-12);
            }
            let mut permuted = ranked.clone();
            permuted.reverse();
            assert_eq!(rrf_fuse(&permuted, RRF_K), fused);
        }
    }

    #[test]
    fn aggregation_takes_max() {
        let parents: HashMap<String, String> = [("a#0", "A"), ("a#1", "A"), ("b#0", "B")]
            .iter()
            .map(|(c, p)| (c.to_string(), p.to_string()))
            .collect();
        let chunks = scored(&[("a#1", 0.9), ("b#0", 0.7), ("a#0", 0.4)]);
        let docs = aggregate_to_documents(&chunks, &parents).unwrap();
        assert_eq!(docs.ids(), ["A", "B"]);
        assert_eq!(docs.hits()[0].score, 0.9);

        let orphan = scored(&[("zz#0", 1.0)]);
        assert!(matches!(
            aggregate_to_documents(&orphan, &parents),
            Err(RetrievalError::OrphanChunk(id)) if id == "zz#0"
        ));
    }

    #[test]
    fn labels() {
        let five = scored(&[("a", 5.0), ("b", 4.0), ("c", 3.0), ("d", 2.0), ("e", 1.0)]);
        let l: Vec<u8> = label_relevance(&five, &RelevancePolicy::TopK { k: 3 }).iter().map(|x| x.1).collect();
        assert_eq!(l, [1, 1, 1, 0, 0]);

        let three = scored(&[("a", 0.9), ("b", 0.5), ("c", 0.49)]);
        let l: Vec<u8> = label_relevance(&three, &RelevancePolicy::Threshold { tau: 0.5 }).iter().map(|x| x.1).collect();
        assert_eq!(l, [1, 1, 0]);

        let mixed = scored(&[("a", 0.9), ("b", 0.45), ("c", 0.44), ("d", 0.4), ("e", 0.1)]);
        let policy = RelevancePolicy::TopKAndThreshold { k: 3, tau: 0.5 };
        let l: Vec<u8> = label_relevance(&mixed, &policy).iter().map(|x| x.1).collect();
        assert_eq!(l, [1, 0, 0, 0, 0]);

        assert!(RelevancePolicy::TopK { k: 0 }.validate().is_err());
        assert!(RelevancePolicy::Threshold { tau: f64::NAN }.validate().is_err());
    }

    proptest! {
        #[test]
        fn aggregation_matches_group_max(scores in proptest::collection::vec((0usize..6, 0usize..4, -5.0f64..5.0), 0..40)) {
            let mut seen = std::collections::HashSet::new();
            let mut parents = HashMap::new();
            let mut pairs = Vec::new();
            for (doc, ord, s) in scores {
                let id = format!("d{doc}#{ord}");
                if seen.insert(id.clone()) {
                    parents.insert(id.clone(), format!("d{doc}"));
                    pairs.push((id, s));
                }
            }
            let docs = aggregate_to_documents(&RankedList::from_scored(pairs.clone(), usize::MAX), &parents).unwrap();
            let mut oracle: BTreeMap<String, f64> = BTreeMap::new();
            for (id, s) in &pairs {
                let p = parents[id].clone();
                let e = oracle.entry(p).or_insert(f64::NEG_INFINITY);
                *e = e.max(*s);
            }
            let mut expected: Vec<(String, f64)> = oracle.into_iter().collect();
            expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let got: Vec<(String, f64)> = docs.hits().iter().map(|h| (h.id.clone(), h.score)).collect();
            prop_assert_eq!(got, expected);
        }

        #[test]
        fn top_k_labels_form_a_prefix(n in 0usize..30, k in 1usize..15) {
            let pairs = (0..n).map(|i| (format!("d{i:02}"), (n - i) as f64)).collect();
            let labels = label_relevance(&RankedList::from_scored(pairs, usize::MAX), &RelevancePolicy::TopK { k });
            let ones = labels.iter().take_while(|l| l.1 == 1).count();
            prop_assert_eq!(ones, n.min(k));
            prop_assert!(labels[ones..].iter().all(|l| l.1 == 0));
        }
    }
}
