//! Tolerant parsing of model completions.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::StructuredReasoning;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "0")]
    Rejected,
    #[serde(rename = "1")]
    Accepted,
    #[serde(rename = "abstain")]
    Abstain,
}

impl Decision {
    /// 0 for rejected, 1 for accepted.
    pub fn label(self) -> Option<u8> {
        match self {
            Decision::Rejected => Some(0),
            Decision::Accepted => Some(1),
            Decision::Abstain => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseQuality {
    Full,
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentOutput {
    pub reasoning: StructuredReasoning,
    pub prediction_text: String,
    pub decision: Decision,
    pub explanation: String,
    pub parse_quality: ParseQuality,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Issue,
    Petitioner,
    Respondent,
    Deliberation,
}

static PREDICTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)##[ \t]*predictions?[ \t]*:?").unwrap());
static EXPLANATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)##[ \t]*explanations?[ \t]*:?").unwrap());
static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?im)^[ \t]*(\**)[ \t]*(legal[ \t]+issues?(?:[ \t]+analysis)?|arguments?[ \t]+of[ \t]+(?:the[ \t]+)?petitioners?|petitioners?(?:'s)?[ \t]+arguments?|arguments?[ \t]+of[ \t]+(?:the[ \t]+)?respondents?|respondents?(?:'s)?[ \t]+arguments?|deliberation)[ \t]*(:?)[ \t]*(\**)[ \t]*(:?)",
    )
    .unwrap()
});

fn classify(name: &str) -> Section {
    let name = name.to_ascii_lowercase();
    if name.starts_with("legal") {
        Section::Issue
    } else if name.contains("petitioner") {
        Section::Petitioner
    } else if name.contains("respondent") {
        Section::Respondent
    } else {
        Section::Deliberation
    }
}

/// Section headers in `region`: (section, header start, content start).
fn headers(region: &str) -> Vec<(Section, usize, usize)> {
    HEADER
        .captures_iter(region)
        .filter(|c| {
            // a bare phrase at line start is prose, not a header
            let marked = |i: usize| c.get(i).is_some_and(|m| !m.as_str().is_empty());
            marked(1) || marked(3) || marked(4) || marked(5)
        })
        .map(|c| {
            let whole = c.get(0).expect("match");
            (classify(&c[2]), whole.start(), whole.end())
        })
        .collect()
}

/// Whether `text` contains anything the parser treats as structure.
pub fn contains_reserved_marker(text: &str) -> bool {
    text.contains("<think>")
        || text.contains("</think>")
        || PREDICTION.is_match(text)
        || EXPLANATION.is_match(text)
        || !headers(text).is_empty()
}

/// Parse a completion into its reasoning sections, prediction and
/// explanation. Never fails; problems are reported through `parse_quality`.
///
/// `Full` needs the legal issue and both argument sections, a prediction and
/// a non-empty explanation. Deliberation is optional.
pub fn parse_structured_output(text: &str) -> JudgmentOutput {
    let prediction = PREDICTION.find_iter(text).last();
    let (region_end, prediction_text, explanation) = match prediction {
        Some(m) => {
            let rest = &text[m.end()..];
            match EXPLANATION.find(rest) {
                Some(e) => (m.start(), rest[..e.start()].trim(), Some(rest[e.end()..].trim())),
                None => (m.start(), rest.trim(), None),
            }
        }
        None => (text.len(), "", None),
    };

    let mut region = &text[..region_end];
    if let Some(i) = region.find("<think>") {
        region = &region[i + "<think>".len()..];
    }
    if let Some(i) = region.find("</think>") {
        region = &region[..i];
    }

    let found = headers(region);
    let mut sections: [Option<String>; 4] = Default::default();
    for (i, &(section, _, content_start)) in found.iter().enumerate() {
        let end = found.get(i + 1).map_or(region.len(), |h| h.1);
        let slot = &mut sections[section as usize];
        if slot.is_none() {
            *slot = Some(region[content_start..end].trim().to_string());
        }
    }
    let all_sections = sections[..3].iter().all(|s| s.as_deref().is_some_and(|t| !t.is_empty()));
    let [issue, petitioner, respondent, deliberation] = sections.map(Option::unwrap_or_default);

    let decision = if prediction.is_some() {
        normalize_decision(prediction_text)
    } else {
        Decision::Abstain
    };
    let parse_quality = match prediction {
        None => ParseQuality::Failed,
        Some(_) if all_sections && !prediction_text.is_empty() && explanation.is_some_and(|e| !e.is_empty()) => {
            ParseQuality::Full
        }
        Some(_) => ParseQuality::Partial,
    };

    JudgmentOutput {
        reasoning: StructuredReasoning {
            legal_issue: issue,
            petitioner_arguments: petitioner,
            respondent_arguments: respondent,
            deliberation,
        },
        prediction_text: prediction_text.to_string(),
        decision,
        explanation: explanation.unwrap_or_default().to_string(),
        parse_quality,
    }
}

static LITERAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([01])\s*[.)]?\s*(?:\([^()]*\))?\s*\.?$").unwrap());
static DISMISSAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:dismissed|rejected|appeal fails|appeal may be dismissed)\b").unwrap()
});
static ALLOWANCE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:allowed|accepted|appeal succeeds|judgment set aside|appeal can be set aside)\b").unwrap()
});

/// Map free-text predictions to a label.
///
/// A bare `0` or `1` (optionally followed by a parenthesised gloss) is taken
/// literally. Otherwise the text is matched case-insensitively against a
/// dismissal phrase set and an allowance phrase set; exactly one set must
/// match, anything else abstains.
pub fn normalize_decision(prediction_text: &str) -> Decision {
    let text = crate::text::normalize_text(prediction_text);
    if let Some(c) = LITERAL.captures(&text) {
        return if &c[1] == "0" {
            Decision::Rejected
        } else {
            Decision::Accepted
        };
    }
    match (DISMISSAL.is_match(&text), ALLOWANCE.is_match(&text)) {
        (true, false) => Decision::Rejected,
        (false, true) => Decision::Accepted,
        _ => Decision::Abstain,
    }
}
