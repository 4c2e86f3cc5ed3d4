//! Prompt templates and target rendering.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GenerationError, InferenceParams, PromptBundle, StructuredReasoning};
use crate::corpus::Document;
use crate::text::TokenCounter;

pub const SYSTEM_MESSAGE: &str = "You are a smart and intelligent legal assistant for the Indian legal domain. \
Based on the user's instructions, you will have to perform or assist in some tasks related to the Indian legal system. \
Since these tasks have some legal application, only provide responses you are extremely certain about, and avoid \
being ambiguous or uncertain. Ensure that your outputs adhere to the user's instructions or requirements.";

const TASK: &str = "You are a legal expert tasked with making a judgment about whether an appeal should be accepted \
or rejected based on the provided case proceeding, cited statutes and cited cases. Your task is to evaluate whether \
the appeal should be accepted (1) or rejected (0) based on the input.";

pub const PREDICTION_LINE: &str = "##PREDICTION: [Insert your prediction here]";
pub const EXPLANATION_LINE: &str = "##EXPLANATION: [Insert your reasoning here that led you to your prediction.]";

const STRICT: &str = "Strictly do not include anything outside this format. Strictly follow the provided format. \
Do not generate placeholders. Just provide the final judgment and explanation.";

/// Fixed deliberation text used in training targets.
pub const DEFAULT_DELIBERATION: &str =
    "Weighing the arguments against the relevant statutes and cited cases to form a decision.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTemplateId {
    #[serde(rename = "deepseek_r1")]
    DeepSeekR1,
    Phi4Mini,
    Phi4,
    Qwen35,
}

impl PromptTemplateId {
    pub const ALL: [PromptTemplateId; 4] = [
        PromptTemplateId::DeepSeekR1,
        PromptTemplateId::Phi4Mini,
        PromptTemplateId::Phi4,
        PromptTemplateId::Qwen35,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptTemplateId::DeepSeekR1 => "deepseek_r1",
            PromptTemplateId::Phi4Mini => "phi4_mini",
            PromptTemplateId::Phi4 => "phi4",
            PromptTemplateId::Qwen35 => "qwen35",
        }
    }

    fn system(self) -> String {
        match self {
            PromptTemplateId::DeepSeekR1 => format!("SYSTEM:\n{SYSTEM_MESSAGE}"),
            PromptTemplateId::Phi4Mini => format!("<|system|> {SYSTEM_MESSAGE}\n<|end|>"),
            PromptTemplateId::Phi4 => format!("<|im_start|>system<|im_sep|>\n{SYSTEM_MESSAGE}\n<|im_end|>"),
            PromptTemplateId::Qwen35 => format!("<|im_start|><|system|>\n{SYSTEM_MESSAGE}\n<|im_end|>"),
        }
    }

    fn user(self, facts: &str, statutes: &str, cases: &str) -> String {
        match self {
            PromptTemplateId::DeepSeekR1 => format!(
                "USER:\n{TASK}\n\n### Now, evaluate the following case:\nCase Proceedings: {facts}\n\n\
                 Relevant Statutes:\n{statutes}\n\nCited Cases Reference:\n{cases}\n\n\
                 Provide your judgment by strictly following this format:\n{PREDICTION_LINE}\n{EXPLANATION_LINE}\n{STRICT}"
            ),
            _ => {
                let (open, close) = match self {
                    PromptTemplateId::Phi4Mini => ("<|user|> ", "<|end|>"),
                    PromptTemplateId::Phi4 => ("<|im_start|>user<|im_sep|>\n", "<|im_end|>"),
                    _ => ("<|im_start|><|user|> ", "<|im_end|>"),
                };
                format!(
                    "{open}{TASK}\n### Now, evaluate the following case:\nCase Proceedings: {facts}\n\
                     Relevant Statutes:\n{statutes}\nCited Cases Reference:\n{cases}\n\
                     Provide your judgment by strictly following this format:\n{PREDICTION_LINE}\n{EXPLANATION_LINE}\n{STRICT}{close}"
                )
            }
        }
    }

    fn assistant(self) -> &'static str {
        match self {
            PromptTemplateId::DeepSeekR1 => "ASSISTANT:\n### Response:\n",
            PromptTemplateId::Phi4Mini => "<|assistant|>",
            PromptTemplateId::Phi4 => "<|im_start|>assistant<|im_sep|>",
            PromptTemplateId::Qwen35 => "<|im_start|><|assistant|>",
        }
    }

    fn section_gap(self) -> &'static str {
        match self {
            PromptTemplateId::DeepSeekR1 => "\n\n",
            _ => "\n",
        }
    }
}

impl fmt::Display for PromptTemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptTemplateId {
    type Err = GenerationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '.'], "_").as_str() {
            "deepseek_r1" | "deepseek" => Ok(PromptTemplateId::DeepSeekR1),
            "phi4_mini" | "phi4_mini_reasoning" => Ok(PromptTemplateId::Phi4Mini),
            "phi4" | "phi4_reasoning" => Ok(PromptTemplateId::Phi4),
            "qwen35" | "qwen3_5" => Ok(PromptTemplateId::Qwen35),
            other => Err(GenerationError::UnknownTemplate(other.to_string())),
        }
    }
}

/// A rendered prompt split into its chat roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RenderedPrompt {
    pub template: PromptTemplateId,
    pub system: String,
    pub user: String,
    pub assistant: String,
    /// Documents that were dropped to fit the input budget, by id.
    pub dropped: Vec<String>,
}

impl RenderedPrompt {
    /// The full prompt as one string: system, user and assistant parts
    /// joined by newlines.
    pub fn text(&self) -> String {
        format!("{}\n{}\n{}", self.system, self.user, self.assistant)
    }

    /// Lowercase hex SHA-256 of [`RenderedPrompt::text`].
    pub fn hash(&self) -> String {
        prompt_hash(&self.text())
    }
}

pub fn prompt_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn slot(docs: &[Document]) -> String {
    docs.iter().map(|d| d.text.as_str()).collect::<Vec<_>>().join("\n\n")
}

fn render(template: PromptTemplateId, facts: &str, statutes: &[Document], precedents: &[Document]) -> RenderedPrompt {
    RenderedPrompt {
        template,
        system: template.system(),
        user: template.user(facts, &slot(statutes), &slot(precedents)),
        assistant: template.assistant().to_string(),
        dropped: Vec::new(),
    }
}

/// Render a prompt that fits `params.input_budget_tokens`.
///
/// Documents are dropped one at a time, lowest-ranked precedent first, then
/// lowest-ranked statute, until the prompt fits. The facts are never cut.
pub fn assemble_prompt(
    template: PromptTemplateId,
    bundle: &PromptBundle,
    params: &InferenceParams,
    counter: &dyn TokenCounter,
) -> Result<RenderedPrompt, GenerationError> {
    let budget = params.input_budget_tokens;
    let facts = bundle.facts.text();
    let bare = render(template, facts, &[], &[]);
    let bare_tokens = counter.count(&bare.text());
    if bare_tokens > budget {
        return Err(GenerationError::Budget {
            tokens: bare_tokens,
            budget,
        });
    }

    let mut statutes = bundle.statutes.len();
    let mut precedents = bundle.precedents.len();
    loop {
        let mut prompt = render(template, facts, &bundle.statutes[..statutes], &bundle.precedents[..precedents]);
        if counter.count(&prompt.text()) <= budget {
            prompt.dropped = bundle.precedents[precedents..]
                .iter()
                .rev()
                .chain(bundle.statutes[statutes..].iter().rev())
                .map(|d| d.id.clone())
                .collect();
            return Ok(prompt);
        }
        if precedents > 0 {
            precedents -= 1;
        } else if statutes > 0 {
            statutes -= 1;
        } else {
            // unreachable for counters where removing text never adds tokens
            return Err(GenerationError::Budget {
                tokens: counter.count(&prompt.text()),
                budget,
            });
        }
    }
}

/// Everything a training target contains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub reasoning: StructuredReasoning,
    pub prediction: String,
    pub explanation: String,
}

/// Render the completion a model is trained to produce.
pub fn render_target(record: &TargetRecord, template: PromptTemplateId) -> String {
    let gap = template.section_gap();
    let r = &record.reasoning;
    format!(
        "<think>\n**Legal Issue Analysis:**\n{}{gap}**Arguments of Petitioner:**\n{}{gap}\
         **Arguments of Respondent:**\n{}{gap}**Deliberation:**\n{}\n</think>\n##PREDICTION: {}\n##EXPLANATION: {}",
        r.legal_issue, r.petitioner_arguments, r.respondent_arguments, r.deliberation, record.prediction, record.explanation
    )
}
