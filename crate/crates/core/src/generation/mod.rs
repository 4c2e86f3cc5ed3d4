//! Prompt assembly, LLM backends and structured-output parsing.

mod backend;
mod parse;
mod prompt;

use serde::{Deserialize, Serialize};

use crate::corpus::{CaseFacts, Document};

pub use backend::{
    complete, Completion, CompletionSource, HttpLlmBackend, LlmBackend, LlmConfig, ScriptedBackend, ScriptedEntry,
    LLM_ENDPOINT_ENV,
};
pub use parse::{contains_reserved_marker, normalize_decision, parse_structured_output, Decision, JudgmentOutput, ParseQuality};
pub use prompt::{
    assemble_prompt, prompt_hash, render_target, PromptTemplateId, RenderedPrompt, TargetRecord, DEFAULT_DELIBERATION,
    EXPLANATION_LINE, PREDICTION_LINE, SYSTEM_MESSAGE,
};

#[derive(Debug, thiserror::Error)]
pub enum GenerationError {
    #[error("prompt needs {tokens} tokens without any retrieved documents, budget is {budget}")]
    Budget { tokens: usize, budget: usize },
    #[error("unknown prompt template {0:?}")]
    UnknownTemplate(String),
    #[error("invalid inference parameters: {0}")]
    Params(String),
    #[error("llm backend failed after {attempts} attempt(s): {message}")]
    Backend { attempts: usize, message: String },
    #[error("scripted completions: {0}")]
    Fixture(String),
}

/// The four reasoning sections of a judgment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredReasoning {
    pub legal_issue: String,
    pub petitioner_arguments: String,
    pub respondent_arguments: String,
    pub deliberation: String,
}

/// Facts plus retrieved documents, each list in rank order.
#[derive(Debug, Clone)]
pub struct PromptBundle {
    pub facts: CaseFacts,
    pub statutes: Vec<Document>,
    pub precedents: Vec<Document>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceParams {
    pub max_new_tokens: usize,
    pub no_repeat_ngram: usize,
    pub repetition_penalty: f64,
    pub input_budget_tokens: usize,
}

impl Default for InferenceParams {
    fn default() -> Self {
        Self {
            max_new_tokens: 4096,
            no_repeat_ngram: 6,
            repetition_penalty: 1.1,
            input_budget_tokens: 16_384,
        }
    }
}

impl InferenceParams {
    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.max_new_tokens == 0 || self.no_repeat_ngram == 0 || self.input_budget_tokens == 0 {
            return Err(GenerationError::Params("token limits must be positive".into()));
        }
        if !(self.repetition_penalty > 0.0 && self.repetition_penalty.is_finite()) {
            return Err(GenerationError::Params("repetition penalty must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
