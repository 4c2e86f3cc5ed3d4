//! Lexical metrics, token percentiles and expert-score aggregation.

mod expert;
mod metrics;
mod percentiles;
mod report;

pub use expert::{aggregate_expert_scores, ComponentSummary, ExpertComponent, ExpertRating};
pub use metrics::{bleu, meteor_lite, rouge_l, rouge_n, METEOR_ALPHA, METEOR_BETA, METEOR_GAMMA};
pub use percentiles::{token_percentiles, PercentilePoint, PercentileSpec, PercentileTable};
pub use report::{ExternalScorer, LexicalScores, MetricReport, PairScores, LEXICAL_COLUMNS};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{candidates} candidate lines but {references} reference lines")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("expert score {0} outside 1..=10")]
    Rating(i64),
    #[error("percentiles: {0}")]
    Percentile(String),
    #[error("external scorer: {0}")]
    External(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_means_and_mismatch() {
        let c = vec!["the cat sat".to_string(), "a b c d".to_string()];
        let r = vec!["the cat".to_string(), "a b c d".to_string()];
        let report = MetricReport::score(&c, &r).unwrap();
        assert!((report.mean.lexical.rouge1 - 0.9).abs() < 1e-12);
        assert_eq!(report.pairs[1].lexical.bleu, 1.0);
        let err = MetricReport::score(&c, &r[..1]).unwrap_err();
        assert_eq!(err.to_string(), "2 candidate lines but 1 reference lines");

        let jsonl = report.to_jsonl();
        let last: serde_json::Value = serde_json::from_str(jsonl.lines().last().unwrap()).unwrap();
        assert_eq!(last["record"], "mean");
        assert!(last.get("rougeL").is_some());
        let table = report.to_table("stub");
        let head: Vec<&str> = table.lines().next().unwrap().split('|').map(str::trim).collect();
        assert_eq!(head, ["Model", "R-1", "R-2", "R-L", "BLEU", "METEOR"]);
        assert!(table.lines().nth(2).unwrap().contains("90.00"));
    }

    #[test]
    fn external_columns() {
        let c = vec!["x".to_string(), "y".to_string()];
        let mut report = MetricReport::score(&c, &c).unwrap();
        let scorer = ExternalScorer {
            command: vec![
                "sh".into(),
                "-c".into(),
                r#"i=0; while read l; do i=$((i+1)); echo "{\"bertscore\": 0.$i, \"blanc\": 0.5}"; done"#.into(),
            ],
        };
        let cols = scorer.run(&c, &c).unwrap();
        report.attach_external(cols).unwrap();
        assert!((report.mean.external["bertscore"] - 0.15).abs() < 1e-12);
        let head = report.to_table("m").lines().next().unwrap().to_string();
        assert!(head.ends_with("BERTScore | BLANC"));

        let bad = ExternalScorer {
            command: vec!["sh".into(), "-c".into(), r#"while read l; do echo '{"bertscore": 3}'; done"#.into()],
        };
        assert!(bad.run(&c, &c).is_err());
        assert!(ExternalScorer { command: vec![] }.run(&c, &c).is_err());
        assert!(report.attach_external(vec![]).is_err());
    }
}
