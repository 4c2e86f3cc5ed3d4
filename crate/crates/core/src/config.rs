//! Run configuration: a TOML file with one section per subsystem.
//!
//! ```toml
//! seed = 24301
//!
//! [store]
//! path = "store"
//!
//! [retrieval]
//! topology = "staged_hybrid"
//! groups = ["statutes", "precedents"]
//! relevance = { mode = "top_k", k = 10 }
//!
//! [embedding]
//! backend = "stub"
//!
//! [llm]
//! backend = "scripted"
//! completions = "completions.jsonl"
//! template = "deepseek_r1"
//!
//! [inference]
//! input_budget_tokens = 16384
//! ```
//!
//! Relative paths resolve against the config file's directory. The
//! `JURISRAG_EMBED_ENDPOINT` and `JURISRAG_LLM_ENDPOINT` environment
//! variables override the configured endpoints.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingConfig;
use crate::generation::{InferenceParams, LlmConfig, PromptTemplateId};
use crate::retrieval::{CollectionGroup, PipelineTopology, RelevancePolicy, TopologyKind};

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingBackendKind {
    #[default]
    Stub,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmBackendKind {
    #[default]
    Scripted,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreSection {
    pub path: PathBuf,
    /// Root for index directories; defaults to `<store>/index`.
    pub index_dir: Option<PathBuf>,
}

impl Default for StoreSection {
    fn default() -> Self {
        Self {
            path: PathBuf::from("store"),
            index_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSection {
    pub topology: TopologyKind,
    pub groups: Vec<CollectionGroup>,
    pub relevance: RelevancePolicy,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        Self {
            topology: TopologyKind::StagedHybrid,
            groups: CollectionGroup::ALL.to_vec(),
            relevance: RelevancePolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub backend: EmbeddingBackendKind,
    pub endpoint: Option<String>,
    pub batch_size: usize,
    pub timeout_secs: u64,
    pub retries: usize,
    pub max_in_flight: usize,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let d = EmbeddingConfig::default();
        Self {
            backend: EmbeddingBackendKind::Stub,
            endpoint: d.endpoint,
            batch_size: d.batch_size,
            timeout_secs: d.timeout_secs,
            retries: d.retries,
            max_in_flight: d.max_in_flight,
        }
    }
}

impl EmbeddingSection {
    pub fn client_config(&self) -> EmbeddingConfig {
        EmbeddingConfig {
            endpoint: self.endpoint.clone(),
            batch_size: self.batch_size,
            timeout_secs: self.timeout_secs,
            retries: self.retries,
            max_in_flight: self.max_in_flight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub backend: LlmBackendKind,
    /// Scripted completions, one `{"prompt_hash", "completion"}` per line.
    pub completions: Option<PathBuf>,
    pub template: PromptTemplateId,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: u64,
    pub retries: usize,
}

impl Default for LlmSection {
    fn default() -> Self {
        let d = LlmConfig::default();
        Self {
            backend: LlmBackendKind::Scripted,
            completions: None,
            template: PromptTemplateId::DeepSeekR1,
            endpoint: d.endpoint,
            model: d.model,
            timeout_secs: d.timeout_secs,
            retries: d.retries,
        }
    }
}

impl LlmSection {
    pub fn client_config(&self) -> LlmConfig {
        LlmConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            timeout_secs: self.timeout_secs,
            retries: self.retries,
            ..LlmConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub store: StoreSection,
    pub retrieval: RetrievalSection,
    pub embedding: EmbeddingSection,
    pub llm: LlmSection,
    pub inference: InferenceParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            store: StoreSection::default(),
            retrieval: RetrievalSection::default(),
            embedding: EmbeddingSection::default(),
            llm: LlmSection::default(),
            inference: InferenceParams::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Read, rebase relative paths and validate.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml(&text).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        rebase(base, &mut config.store.path);
        if let Some(p) = config.store.index_dir.as_mut() {
            rebase(base, p);
        }
        if let Some(p) = config.llm.completions.as_mut() {
            rebase(base, p);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.retrieval.groups.is_empty() {
            return Err(ConfigError::Invalid("retrieval.groups is empty".into()));
        }
        self.retrieval
            .relevance
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.inference.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.embedding.batch_size == 0 || self.embedding.max_in_flight == 0 {
            return Err(ConfigError::Invalid("embedding batch_size and max_in_flight must be positive".into()));
        }
        Ok(())
    }

    /// The configured topology preset with the run seed applied.
    pub fn topology(&self) -> PipelineTopology {
        PipelineTopology::preset(self.retrieval.topology).with_seed(self.seed)
    }

    pub fn index_dir(&self, kind: TopologyKind) -> PathBuf {
        match &self.store.index_dir {
            Some(root) => root.join(kind.as_str()),
            None => crate::retrieval::RetrievalIndexes::default_dir(&self.store.path, kind),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_sections() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.topology().seed(), DEFAULT_SEED);

        let c = RunConfig::from_toml(
            r#"
seed = 7
[store]
path = "data"
[retrieval]
topology = "parallel_hybrid"
groups = ["precedents"]
relevance = { mode = "top_k_and_threshold", k = 3, tau = 0.01 }
[llm]
template = "qwen35"
[inference]
input_budget_tokens = 8000
"#,
        )
        .unwrap();
        assert_eq!(c.topology().kind(), TopologyKind::ParallelHybrid);
        assert_eq!(c.topology().seed(), 7);
        assert_eq!(c.retrieval.groups, [CollectionGroup::Precedents]);
        assert_eq!(c.retrieval.relevance, RelevancePolicy::TopKAndThreshold { k: 3, tau: 0.01 });
        assert_eq!(c.llm.template, PromptTemplateId::Qwen35);
        assert_eq!(c.inference.input_budget_tokens, 8000);
        assert_eq!(c.inference.max_new_tokens, 4096);
        assert_eq!(c.index_dir(TopologyKind::DenseOnly), Path::new("data/index/dense_only"));
    }

    #[test]
    fn typos_and_bad_values_are_rejected() {
        assert!(RunConfig::from_toml("[store]\npaht = \"x\"").is_err());
        assert!(RunConfig::from_toml("[retrieval]\ntopology = \"nope\"").is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[retrieval]\ngroups = []\n").unwrap();
        assert!(matches!(RunConfig::load(&path), Err(ConfigError::Invalid(_))));
        std::fs::write(&path, "[llm]\ncompletions = \"c.jsonl\"\n").unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.llm.completions.unwrap(), dir.path().join("c.jsonl"));
        assert_eq!(c.store.path, dir.path().join("store"));
    }
}
