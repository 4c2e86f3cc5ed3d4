//! Aggregation of expert Likert ratings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertComponent {
    LegalIssue,
    PetitionerArgs,
    RespondentArgs,
    Prediction,
    Explanation,
}

impl ExpertComponent {
    pub const ALL: [ExpertComponent; 5] = [
        ExpertComponent::LegalIssue,
        ExpertComponent::PetitionerArgs,
        ExpertComponent::RespondentArgs,
        ExpertComponent::Prediction,
        ExpertComponent::Explanation,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRating")]
pub struct ExpertRating {
    pub rater: String,
    pub component: ExpertComponent,
    score: u8,
}

#[derive(Deserialize)]
struct RawRating {
    rater: String,
    component: ExpertComponent,
    score: i64,
}

impl TryFrom<RawRating> for ExpertRating {
    type Error = EvalError;
    fn try_from(r: RawRating) -> Result<Self, EvalError> {
        let score = u8::try_from(r.score).map_err(|_| EvalError::Rating(r.score))?;
        Self::new(r.rater, r.component, score)
    }
}

impl ExpertRating {
    pub fn new(rater: impl Into<String>, component: ExpertComponent, score: u8) -> Result<Self, EvalError> {
        if !(1..=10).contains(&score) {
            return Err(EvalError::Rating(score as i64));
        }
        Ok(Self {
            rater: rater.into(),
            component,
            score,
        })
    }

    pub fn score(&self) -> u8 {
        self.score
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSummary {
    pub component: ExpertComponent,
    pub rater_means: BTreeMap<String, f64>,
    /// Mean of the per-rater means.
    pub average: f64,
}

/// Per-component rater means and their average. Components nobody rated are
/// left out.
pub fn aggregate_expert_scores(ratings: &[ExpertRating]) -> Vec<ComponentSummary> {
    let mut sums: BTreeMap<ExpertComponent, BTreeMap<&str, (u64, u64)>> = BTreeMap::new();
    for r in ratings {
        let e = sums.entry(r.component).or_default().entry(&r.rater).or_default();
        e.0 += r.score as u64;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(component, raters)| {
            let rater_means: BTreeMap<String, f64> = raters
                .into_iter()
                .map(|(rater, (sum, n))| (rater.to_string(), sum as f64 / n as f64))
                .collect();
            let average = rater_means.values().sum::<f64>() / rater_means.len() as f64;
            ComponentSummary {
                component,
                rater_means,
                average,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_is_enforced() {
        assert!(ExpertRating::new("a", ExpertComponent::Prediction, 0).is_err());
        assert!(ExpertRating::new("a", ExpertComponent::Prediction, 11).is_err());
        assert!(serde_json::from_str::<ExpertRating>(r#"{"rater":"a","component":"prediction","score":-3}"#).is_err());
        let ok: ExpertRating = serde_json::from_str(r#"{"rater":"a","component":"legal_issue","score":10}"#).unwrap();
        assert_eq!(ok.score(), 10);
    }

    #[test]
    fn means_of_means() {
        let r = |who: &str, c, s| ExpertRating::new(who, c, s).unwrap();
        let ratings = vec![
            r("e1", ExpertComponent::LegalIssue, 6),
            r("e1", ExpertComponent::LegalIssue, 8),
            r("e2", ExpertComponent::LegalIssue, 4),
            r("e1", ExpertComponent::Explanation, 9),
        ];
        let out = aggregate_expert_scores(&ratings);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].component, ExpertComponent::LegalIssue);
        assert_eq!(out[0].rater_means["e1"], 7.0);
        assert_eq!(out[0].average, 5.5);
        assert_eq!(out[1].average, 9.0);
        assert!(aggregate_expert_scores(&[]).is_empty());
    }
}
