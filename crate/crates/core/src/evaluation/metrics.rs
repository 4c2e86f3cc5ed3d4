//! Lexical overlap metrics on lowercased alphanumeric tokens.

use std::collections::HashMap;

use crate::lexical::porter::stem;
use crate::text::alnum_tokens;

pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: f64 = 3.0;
pub const METEOR_GAMMA: f64 = 0.5;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap and the candidate n-gram total.
fn clipped_overlap(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let reference = ngram_counts(reference, n);
    let overlap = ngram_counts(candidate, n)
        .into_iter()
        .map(|(gram, c)| c.min(reference.get(gram).copied().unwrap_or(0)))
        .sum();
    (overlap, (candidate.len() + 1).saturating_sub(n))
}

fn f1(matched: usize, candidate_total: usize, reference_total: usize) -> f64 {
    if matched == 0 || candidate_total == 0 || reference_total == 0 {
        return 0.0;
    }
    let p = matched as f64 / candidate_total as f64;
    let r = matched as f64 / reference_total as f64;
    2.0 * p * r / (p + r)
}

pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> f64 {
    let (c, r) = (alnum_tokens(candidate), alnum_tokens(reference));
    let (overlap, c_total) = clipped_overlap(&c, &r, n);
    f1(overlap, c_total, (r.len() + 1).saturating_sub(n))
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (alnum_tokens(candidate), alnum_tokens(reference));
    f1(lcs_len(&c, &r), c.len(), r.len())
}

/// Sentence BLEU-4 with add-one smoothing on orders that have no match.
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (alnum_tokens(candidate), alnum_tokens(reference));
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let (matched, total) = clipped_overlap(&c, &r, n);
        let p = if matched == 0 {
            1.0 / (total as f64 + 1.0)
        } else {
            matched as f64 / total as f64
        };
        log_sum += p.ln();
    }
    let bp = if c.len() < r.len() {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    } else {
        1.0
    };
    bp * (log_sum / 4.0).exp()
}

/// Greedy unigram alignment: exact matches first, then Porter stems.
/// Returns (candidate index, reference index) pairs sorted by candidate index.
fn align(c: &[String], r: &[String]) -> Vec<(usize, usize)> {
    let mut c_used = vec![false; c.len()];
    let mut r_used = vec![false; r.len()];
    let mut pairs = Vec::new();
    let stages: [Box<dyn Fn(&String) -> String>; 2] = [Box::new(|t: &String| t.clone()), Box::new(|t: &String| stem(t))];
    for key in &stages {
        let r_keys: Vec<String> = r.iter().map(|t| key(t)).collect();
        for (i, tok) in c.iter().enumerate() {
            if c_used[i] {
                continue;
            }
            let k = key(tok);
            if let Some(j) = (0..r.len()).find(|&j| !r_used[j] && r_keys[j] == k) {
                c_used[i] = true;
                r_used[j] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// METEOR restricted to the exact and stem stages.
pub fn meteor_lite(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (alnum_tokens(candidate), alnum_tokens(reference));
    let pairs = align(&c, &r);
    let m = pairs.len();
    if m == 0 {
        return 0.0;
    }
    let chunks = 1 + pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count();
    let p = m as f64 / c.len() as f64;
    let rc = m as f64 / r.len() as f64;
    let f_mean = p * rc / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * rc);
    let penalty = METEOR_GAMMA * (chunks as f64 / m as f64).powf(METEOR_BETA);
    f_mean * (1.0 - penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Naive oracles: quadratic counting without hash maps.
    fn naive_overlap(c: &[String], r: &[String], n: usize) -> (usize, usize) {
        if c.len() < n {
            return (0, 0);
        }
        let cg: Vec<&[String]> = c.windows(n).collect();
        let mut rg: Vec<Option<&[String]>> = if r.len() < n { vec![] } else { r.windows(n).map(Some).collect() };
        let mut hit = 0;
        for g in &cg {
            if let Some(slot) = rg.iter_mut().find(|s| s.is_some_and(|x| x == *g)) {
                *slot = None;
                hit += 1;
            }
        }
        (hit, cg.len())
    }

    fn naive_lcs(a: &[String], b: &[String]) -> usize {
        let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                t[i][j] = if a[i - 1] == b[j - 1] {
                    t[i - 1][j - 1] + 1
                } else {
                    t[i - 1][j].max(t[i][j - 1])
                };
            }
        }
        t[a.len()][b.len()]
    }

    #[test]
    fn worked_examples() {
        assert!((rouge_n("the cat sat", "the cat", 1) - 0.8).abs() < 1e-15);
        assert_eq!(rouge_n("a b", "c d", 1), 0.0);
        assert_eq!(rouge_n("", "", 1), 0.0);
        assert!((rouge_l("a b c d", "a c d b") - 0.75).abs() < 1e-15);
        assert_eq!(rouge_l("", "a"), 0.0);
        assert_eq!(bleu("", "a b"), 0.0);
        assert!((bleu("w x y z", "w x y z") - 1.0).abs() < 1e-15);
        let expected = (0.25f64 * 0.25 * (1.0 / 3.0) * 0.5).powf(0.25);
        assert!((bleu("the the the the", "the cat") - expected).abs() < 1e-15);
        assert_eq!(meteor_lite("appeal", "appeal"), 0.5);
        assert_eq!(meteor_lite("x", "y"), 0.0);
        assert!(meteor_lite("running", "runs") > 0.0);
    }

    #[test]
    fn meteor_formula() {
        // 3 of 4 candidate tokens match 3 of 3 reference tokens in 2 chunks
        let p: f64 = 0.75;
        let r: f64 = 1.0;
        let f = p * r / (0.9 * p + 0.1 * r);
        let expected = f * (1.0 - 0.5 * (2.0f64 / 3.0).powi(3));
        assert!((meteor_lite("a b q c", "a b c") - expected).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn oracle_agreement(c in proptest::collection::vec("[a-e]", 0..14), r in proptest::collection::vec("[a-e]", 0..14)) {
            let (cs, rs) = (c.join(" "), r.join(" "));
            for n in 1..=2 {
                let (hit, total) = naive_overlap(&c, &r, n);
                let rt = r.len().saturating_sub(n - 1);
                let expect = if hit == 0 { 0.0 } else {
                    let (p, q) = (hit as f64 / total as f64, hit as f64 / rt as f64);
                    2.0 * p * q / (p + q)
                };
                prop_assert!((rouge_n(&cs, &rs, n) - expect).abs() <= 1e-12);
            }
            let l = naive_lcs(&c, &r);
            let expect = if l == 0 { 0.0 } else {
                let (p, q) = (l as f64 / c.len() as f64, l as f64 / r.len() as f64);
                2.0 * p * q / (p + q)
            };
            prop_assert!((rouge_l(&cs, &rs) - expect).abs() <= 1e-12);
            for v in [rouge_n(&cs, &rs, 1), rouge_n(&cs, &rs, 2), rouge_l(&cs, &rs), bleu(&cs, &rs), meteor_lite(&cs, &rs)] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn identity(words in proptest::collection::vec("[a-z]{1,6}", 4..20)) {
            let s = words.join(" ");
            prop_assert!((rouge_n(&s, &s, 1) - 1.0).abs() < 1e-12);
            prop_assert!((rouge_n(&s, &s, 2) - 1.0).abs() < 1e-12);
            prop_assert!((rouge_l(&s, &s) - 1.0).abs() < 1e-12);
            prop_assert!((bleu(&s, &s) - 1.0).abs() < 1e-12);
        }
    }
}
