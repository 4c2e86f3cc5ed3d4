//! Lexical metrics, token percentiles and expert score aggregation.
//!
//! cargo run --example evaluation

use jurisrag::evaluation::{
    aggregate_expert_scores, ExpertComponent, ExpertRating, MetricReport, PercentileSpec, PercentileTable,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let candidates = vec!["the appeal is dismissed".to_string(), "the cat sat".to_string()];
    let references = vec!["the appeal is dismissed with costs".to_string(), "the cat".to_string()];
    let report = MetricReport::score(&candidates, &references)?;
    print!("{}", report.to_table("example"));

    let lengths: Vec<u64> = (1..=500).map(|i| i * 7 % 1013).collect();
    let table = PercentileTable::build(PercentileSpec::default(), &[("Input Text".into(), lengths)])?;
    print!("{}", table.to_text());

    let mut ratings = Vec::new();
    for (rater, scores) in [("expert1", [7, 6, 8]), ("expert2", [5, 6, 6])] {
        for s in scores {
            ratings.push(ExpertRating::new(rater, ExpertComponent::Prediction, s)?);
        }
    }
    for row in aggregate_expert_scores(&ratings) {
        println!("{:?}: {:?} average {:.2}", row.component, row.rater_means, row.average);
    }
    Ok(())
}
