//! LLM backends: a scripted stub for hermetic runs and an HTTP client.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{GenerationError, InferenceParams, RenderedPrompt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionSource {
    Remote,
    Scripted,
    /// The scripted backend had no entry for this prompt.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub source: CompletionSource,
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, prompt: &RenderedPrompt, params: &InferenceParams) -> Result<Completion, GenerationError>;
}

/// Run `prompt` through `backend`, refusing prompts over the input budget.
pub fn complete(
    backend: &dyn LlmBackend,
    prompt: &RenderedPrompt,
    params: &InferenceParams,
    counter: &dyn crate::text::TokenCounter,
) -> Result<Completion, GenerationError> {
    let tokens = counter.count(&prompt.text());
    if tokens > params.input_budget_tokens {
        return Err(GenerationError::Budget {
            tokens,
            budget: params.input_budget_tokens,
        });
    }
    backend.complete(prompt, params)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptedEntry {
    pub prompt_hash: String,
    pub completion: String,
}

/// Canned completions keyed by the SHA-256 of the full prompt text.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    entries: HashMap<String, String>,
}

impl ScriptedBackend {
    pub fn new(entries: impl IntoIterator<Item = ScriptedEntry>) -> Self {
        Self {
            entries: entries.into_iter().map(|e| (e.prompt_hash, e.completion)).collect(),
        }
    }

    pub fn from_jsonl(text: &str) -> Result<Self, GenerationError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            entries.push(
                serde_json::from_str::<ScriptedEntry>(line)
                    .map_err(|e| GenerationError::Fixture(format!("line {}: {e}", i + 1)))?,
            );
        }
        Ok(Self::new(entries))
    }

    pub fn load(path: &Path) -> Result<Self, GenerationError> {
        let text = std::fs::read_to_string(path).map_err(|e| GenerationError::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The completion returned for prompts without an entry.
    pub fn fallback_text(hash: &str) -> String {
        format!("[no scripted completion for prompt {hash}]")
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, prompt: &RenderedPrompt, _params: &InferenceParams) -> Result<Completion, GenerationError> {
        let hash = prompt.hash();
        Ok(match self.entries.get(&hash) {
            Some(text) => Completion {
                text: text.clone(),
                source: CompletionSource::Scripted,
            },
            None => Completion {
                text: Self::fallback_text(&hash),
                source: CompletionSource::Fallback,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: u64,
    pub retries: usize,
    pub max_in_flight: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: None,
            timeout_secs: 600,
            retries: 2,
            max_in_flight: 2,
        }
    }
}

pub const LLM_ENDPOINT_ENV: &str = "JURISRAG_LLM_ENDPOINT";

impl LlmConfig {
    /// The endpoint, with the environment variable taking precedence.
    pub fn resolved_endpoint(&self) -> Option<String> {
        std::env::var(LLM_ENDPOINT_ENV)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .or_else(|| self.endpoint.clone())
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a str>,
    messages: Vec<Message<'a>>,
    max_tokens: usize,
    no_repeat_ngram_size: usize,
    repetition_penalty: f64,
}

/// Chat-completions style client.
///
/// Sends `{"model", "messages": [system, user], "max_tokens",
/// "no_repeat_ngram_size", "repetition_penalty"}`. The response body is
/// taken as the completion text, unless it is a JSON object of the form
/// `{"choices": [{"message": {"content": ...}}]}`.
pub struct HttpLlmBackend {
    endpoint: String,
    model: Option<String>,
    retries: usize,
    agent: ureq::Agent,
}

enum Attempt {
    Transient(String),
    Fatal(String),
}

impl HttpLlmBackend {
    pub fn new(endpoint: impl Into<String>, model: Option<String>, timeout: Duration, retries: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            model,
            retries,
            agent,
        }
    }

    pub fn from_config(config: &LlmConfig) -> Option<Self> {
        config.resolved_endpoint().map(|endpoint| {
            Self::new(
                endpoint,
                config.model.clone(),
                Duration::from_secs(config.timeout_secs),
                config.retries,
            )
        })
    }

    fn attempt(&self, prompt: &RenderedPrompt, params: &InferenceParams) -> Result<String, Attempt> {
        // the assistant preamble opens the reply, so it ends the user turn
        let user = format!("{}\n{}", prompt.user, prompt.assistant);
        let body = ChatRequest {
            model: self.model.as_deref(),
            messages: vec![
                Message {
                    role: "system",
                    content: &prompt.system,
                },
                Message {
                    role: "user",
                    content: &user,
                },
            ],
            max_tokens: params.max_new_tokens,
            no_repeat_ngram_size: params.no_repeat_ngram,
            repetition_penalty: params.repetition_penalty,
        };
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| Attempt::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        if status >= 500 || status == 429 {
            return Err(Attempt::Transient(format!("status {status}")));
        }
        if status >= 400 {
            return Err(Attempt::Fatal(format!("status {status}")));
        }
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Transient(e.to_string()))?;
        Ok(extract_content(&text).unwrap_or(text))
    }
}

fn extract_content(body: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(body).ok()?;
    v.pointer("/choices/0/message/content")?.as_str().map(str::to_string)
}

impl LlmBackend for HttpLlmBackend {
    fn complete(&self, prompt: &RenderedPrompt, params: &InferenceParams) -> Result<Completion, GenerationError> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(prompt, params) {
                Ok(text) => {
                    return Ok(Completion {
                        text,
                        source: CompletionSource::Remote,
                    })
                }
                Err(Attempt::Transient(_)) if attempts <= self.retries => continue,
                Err(Attempt::Transient(message)) | Err(Attempt::Fatal(message)) => {
                    return Err(GenerationError::Backend { attempts, message });
                }
            }
        }
    }
}
