//! End-to-end judgment run: retrieval, prompt, completion, parse.
//!
//! Every run yields a line-delimited manifest. A failed run still yields the
//! records of the stages that finished, followed by a status record naming
//! the failed stage.

use serde::Serialize;
use serde_json::json;

use crate::corpus::{CaseFacts, CorpusStore};
use crate::embedding::EmbeddingProvider;
use crate::generation::{
    assemble_prompt, complete, parse_structured_output, GenerationError, InferenceParams, JudgmentOutput, LlmBackend,
    PromptBundle, PromptTemplateId,
};
use crate::retrieval::{manifest_lines, CollectionGroup, RelevancePolicy, RetrievalError, RetrievalIndexes};
use crate::text::TokenCounter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Retrieval,
    Prompt,
    Completion,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
}

#[derive(Debug)]
pub struct StageFailure {
    pub stage: Stage,
    pub error: PipelineError,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineSettings {
    pub groups: Vec<CollectionGroup>,
    pub relevance: RelevancePolicy,
    pub template: PromptTemplateId,
    pub inference: InferenceParams,
    /// Backend labels recorded in the manifest, e.g. `stub`, `scripted`.
    pub embedding_backend: String,
    pub llm_backend: String,
}

pub struct Pipeline<'a> {
    pub indexes: &'a RetrievalIndexes,
    pub store: &'a CorpusStore,
    pub embedder: &'a dyn EmbeddingProvider,
    pub backend: &'a dyn LlmBackend,
    pub counter: &'a dyn TokenCounter,
    pub settings: PipelineSettings,
}

#[derive(Debug)]
pub struct PipelineRun {
    pub lines: Vec<String>,
    pub result: Result<JudgmentOutput, StageFailure>,
}

impl PipelineRun {
    pub fn manifest(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }
}

fn fail(lines: &mut Vec<String>, stage: Stage, error: PipelineError) -> Result<JudgmentOutput, StageFailure> {
    lines.push(json!({"record": "status", "status": "failed", "stage": stage, "error": error.to_string()}).to_string());
    Err(StageFailure { stage, error })
}

impl Pipeline<'_> {
    pub fn run(&self, facts: &CaseFacts) -> PipelineRun {
        let mut lines = Vec::new();
        let result = self.run_into(facts, &mut lines);
        PipelineRun { lines, result }
    }

    fn run_into(&self, facts: &CaseFacts, lines: &mut Vec<String>) -> Result<JudgmentOutput, StageFailure> {
        let topology = self.indexes.topology();
        let mut config = serde_json::to_value(&self.settings).expect("settings serialize");
        config["record"] = "config".into();
        config["topology"] = topology.kind().as_str().into();
        config["filters"] = json!(facts.filters);
        lines.push(config.to_string());

        let sets = match self
            .indexes
            .run(facts, self.store, self.embedder, &self.settings.groups, &self.settings.relevance)
        {
            Ok(sets) => sets,
            Err(e) => return fail(lines, Stage::Retrieval, e.into()),
        };
        lines.extend(manifest_lines(topology, &sets));

        let mut bundle = PromptBundle {
            facts: facts.clone(),
            statutes: Vec::new(),
            precedents: Vec::new(),
        };
        for set in &sets {
            let slot = match set.group {
                CollectionGroup::Statutes => &mut bundle.statutes,
                CollectionGroup::Precedents => &mut bundle.precedents,
            };
            for doc in set.accepted() {
                match self.store.get(&doc.id) {
                    Some(d) => slot.push(d.as_ref().clone()),
                    None => return fail(lines, Stage::Retrieval, RetrievalError::StaleIndex(doc.id.clone()).into()),
                }
            }
        }

        let prompt = match assemble_prompt(self.settings.template, &bundle, &self.settings.inference, self.counter) {
            Ok(p) => p,
            Err(e) => return fail(lines, Stage::Prompt, e.into()),
        };
        lines.push(
            json!({
                "record": "prompt",
                "template": prompt.template,
                "prompt_hash": prompt.hash(),
                "tokens": self.counter.count(&prompt.text()),
                "dropped": prompt.dropped,
                "system": prompt.system,
                "user": prompt.user,
                "assistant": prompt.assistant,
            })
            .to_string(),
        );

        let completion = match complete(self.backend, &prompt, &self.settings.inference, self.counter) {
            Ok(c) => c,
            Err(e) => return fail(lines, Stage::Completion, e.into()),
        };
        lines.push(json!({"record": "completion", "source": completion.source, "text": completion.text}).to_string());

        let judgment = parse_structured_output(&completion.text);
        let mut record = serde_json::to_value(&judgment).expect("judgment serializes");
        record["record"] = "judgment".into();
        lines.push(record.to_string());
        lines.push(json!({"record": "status", "status": "ok"}).to_string());
        Ok(judgment)
    }
}
