//! Per-pair scoring and report rendering.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{bleu, meteor_lite, rouge_l, rouge_n};
use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LexicalScores {
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub bleu: f64,
    pub meteor: f64,
}

impl LexicalScores {
    pub fn compute(candidate: &str, reference: &str) -> Self {
        Self {
            rouge1: rouge_n(candidate, reference, 1),
            rouge2: rouge_n(candidate, reference, 2),
            rouge_l: rouge_l(candidate, reference),
            bleu: bleu(candidate, reference),
            meteor: meteor_lite(candidate, reference),
        }
    }

    fn values(&self) -> [f64; 5] {
        [self.rouge1, self.rouge2, self.rouge_l, self.bleu, self.meteor]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    #[serde(flatten)]
    pub lexical: LexicalScores,
    /// Columns supplied by an external scorer, e.g. `bertscore`, `blanc`.
    #[serde(flatten)]
    pub external: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pairs: Vec<PairScores>,
    pub mean: PairScores,
}

pub const LEXICAL_COLUMNS: [&str; 5] = ["R-1", "R-2", "R-L", "BLEU", "METEOR"];

impl MetricReport {
    /// Score aligned candidate/reference pairs. Pairs are scored in parallel;
    /// means are summed in pair order.
    pub fn score(candidates: &[String], references: &[String]) -> Result<Self, EvalError> {
        if candidates.len() != references.len() {
            return Err(EvalError::LengthMismatch {
                candidates: candidates.len(),
                references: references.len(),
            });
        }
        let pairs = candidates
            .par_iter()
            .zip(references.par_iter())
            .map(|(c, r)| PairScores {
                lexical: LexicalScores::compute(c, r),
                external: BTreeMap::new(),
            })
            .collect();
        let mut report = Self {
            pairs,
            mean: PairScores {
                lexical: LexicalScores::default(),
                external: BTreeMap::new(),
            },
        };
        report.recompute_mean();
        Ok(report)
    }

    fn recompute_mean(&mut self) {
        let n = self.pairs.len();
        let mut sums = [0.0f64; 5];
        let mut external: BTreeMap<String, f64> = BTreeMap::new();
        for p in &self.pairs {
            for (s, v) in sums.iter_mut().zip(p.lexical.values()) {
                *s += v;
            }
            for (k, v) in &p.external {
                *external.entry(k.clone()).or_insert(0.0) += v;
            }
        }
        let div = |s: f64| if n == 0 { 0.0 } else { s / n as f64 };
        let [r1, r2, rl, b, m] = sums.map(div);
        self.mean = PairScores {
            lexical: LexicalScores {
                rouge1: r1,
                rouge2: r2,
                rouge_l: rl,
                bleu: b,
                meteor: m,
            },
            external: external.into_iter().map(|(k, v)| (k, div(v))).collect(),
        };
    }

    /// Attach columns from an external scorer and refresh the means.
    pub fn attach_external(&mut self, columns: Vec<BTreeMap<String, f64>>) -> Result<(), EvalError> {
        if columns.len() != self.pairs.len() {
            return Err(EvalError::External(format!(
                "scorer returned {} rows for {} pairs",
                columns.len(),
                self.pairs.len()
            )));
        }
        for (pair, cols) in self.pairs.iter_mut().zip(columns) {
            pair.external.extend(cols);
        }
        self.recompute_mean();
        Ok(())
    }

    /// One JSON object per pair, then one for the mean.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.pairs.iter().enumerate() {
            let mut v = serde_json::to_value(p).expect("scores serialize");
            v["record"] = "pair".into();
            v["index"] = i.into();
            out.push_str(&v.to_string());
            out.push('\n');
        }
        let mut v = serde_json::to_value(&self.mean).expect("scores serialize");
        v["record"] = "mean".into();
        v["pairs"] = self.pairs.len().into();
        out.push_str(&v.to_string());
        out.push('\n');
        out
    }

    /// Mean scores as a percentage table, external columns after the lexical ones.
    pub fn to_table(&self, label: &str) -> String {
        let mut header: Vec<String> = vec!["Model".into()];
        header.extend(LEXICAL_COLUMNS.iter().map(|s| s.to_string()));
        header.extend(self.mean.external.keys().map(|k| external_title(k)));
        let mut row = vec![label.to_string()];
        row.extend(self.mean.lexical.values().iter().map(|v| format!("{:.2}", v * 100.0)));
        row.extend(self.mean.external.values().map(|v| format!("{:.2}", v * 100.0)));
        render_table(&[header, row])
    }
}

fn external_title(key: &str) -> String {
    match key {
        "bertscore" => "BERTScore".into(),
        "blanc" => "BLANC".into(),
        other => other.to_string(),
    }
}

/// Left-aligned first column, right-aligned others, `|` separated.
pub(crate) fn render_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("-|-"));
            out.push('\n');
        }
    }
    out
}

/// A semantic scorer run as a child process.
///
/// Each pair is written to stdin as `{"candidate": .., "reference": ..}`, one
/// per line. The process must print one JSON object of numeric columns per
/// input line, in order, with values in [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalScorer {
    pub command: Vec<String>,
}

impl ExternalScorer {
    pub fn run(&self, candidates: &[String], references: &[String]) -> Result<Vec<BTreeMap<String, f64>>, EvalError> {
        let (program, args) = self
            .command
            .split_first()
            .ok_or_else(|| EvalError::External("empty scorer command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| EvalError::External(format!("{program}: {e}")))?;

        let mut input = String::new();
        for (c, r) in candidates.iter().zip(references) {
            input.push_str(&serde_json::json!({"candidate": c, "reference": r}).to_string());
            input.push('\n');
        }
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));

        let stdout = child.stdout.take().expect("piped stdout");
        let mut rows = Vec::new();
        for (i, line) in BufReader::new(stdout).lines().enumerate() {
            let line = line.map_err(|e| EvalError::External(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: BTreeMap<String, f64> = serde_json::from_str(&line)
                .map_err(|e| EvalError::External(format!("output line {}: {e}", i + 1)))?;
            if let Some((k, v)) = row.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                return Err(EvalError::External(format!("output line {}: {k} = {v} outside [0,1]", i + 1)));
            }
            rows.push(row);
        }
        let status = child.wait().map_err(|e| EvalError::External(e.to_string()))?;
        let _ = writer.join();
        if !status.success() {
            return Err(EvalError::External(format!("{program} exited with {status}")));
        }
        Ok(rows)
    }
}
