//! 768-dimensional embeddings from a remote service or a deterministic stub.

use std::sync::Arc;
use std::time::Duration;

use half::f16;
use serde::{Deserialize, Serialize};

use crate::text::{TokenCounter, WordPunctCounter};

pub const EMBEDDING_DIM: usize = 768;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Fp32,
    Fp16,
}

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("expected a {expected}-dimensional vector, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("vector component {index} is not finite")]
    NonFinite { index: usize },
    #[error("text at index {0} is empty")]
    EmptyText(usize),
    #[error("embedding request failed after {attempts} attempt(s) for inputs {failed:?}: {message}")]
    Remote {
        failed: Vec<usize>,
        attempts: usize,
        message: String,
    },
    #[error("provider returned {got} vectors for {expected} inputs")]
    BatchLength { expected: usize, got: usize },
}

/// A finite 768-component vector with its storage precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f32>,
    precision: Precision,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, EmbeddingError> {
        if values.len() != EMBEDDING_DIM {
            return Err(EmbeddingError::Dimension {
                expected: EMBEDDING_DIM,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite { index });
        }
        Ok(Self {
            values,
            precision: Precision::Fp32,
        })
    }

    pub fn basis(index: usize) -> Self {
        let mut values = vec![0.0; EMBEDDING_DIM];
        values[index] = 1.0;
        Self {
            values,
            precision: Precision::Fp32,
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn norm(&self) -> f32 {
        self.values.iter().map(|v| v * v).sum::<f32>().sqrt()
    }

    /// Scale to unit length. Zero vectors are left unchanged.
    pub fn normalized(mut self) -> Self {
        l2_normalize(&mut self.values);
        self
    }

    pub fn dot(&self, other: &Self) -> f32 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn cosine(&self, other: &Self) -> f32 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            self.dot(other) / denom
        }
    }
}

pub(crate) fn l2_normalize(values: &mut [f32]) {
    let norm = values.iter().map(|v| v * v).sum::<f32>().sqrt();
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Round one component to the nearest binary16 value (ties to even),
/// clamping overflow to the largest finite half.
pub fn round_fp16(x: f32) -> f32 {
    let h = f16::from_f32(x);
    if h.is_infinite() {
        if x > 0.0 {
            f16::MAX.to_f32()
        } else {
            f16::MIN.to_f32()
        }
    } else {
        h.to_f32()
    }
}

/// Half-precision copy of a vector, tagged fp16.
pub fn quantize_fp16(v: &EmbeddingVector) -> EmbeddingVector {
    EmbeddingVector {
        values: v.values.iter().map(|&x| round_fp16(x)).collect(),
        precision: Precision::Fp16,
    }
}

/// Anything that turns a batch of texts into one vector per text.
///
/// The same text must always yield the same vector.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Arc<P> {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        (**self).embed(texts)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Feature-hashed unit vector: each token adds ±1 to bucket `fnv1a % 768`,
/// negative when bit 63 of the hash is set.
pub fn stub_embed(text: &str) -> EmbeddingVector {
    let mut values = vec![0.0f32; EMBEDDING_DIM];
    for span in WordPunctCounter.segment(text) {
        let h = fnv1a(text[span].as_bytes());
        let bucket = (h % EMBEDDING_DIM as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        values[bucket] += sign;
    }
    if values.iter().all(|&v| v == 0.0) {
        return EmbeddingVector::basis(0);
    }
    l2_normalize(&mut values);
    EmbeddingVector {
        values,
        precision: Precision::Fp32,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StubEmbedder;

impl EmbeddingProvider for StubEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        Ok(texts.iter().map(|t| stub_embed(t)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub endpoint: Option<String>,
    pub batch_size: usize,
    pub timeout_secs: u64,
    pub retries: usize,
    pub max_in_flight: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            batch_size: 32,
            timeout_secs: 60,
            retries: 2,
            max_in_flight: 4,
        }
    }
}

pub const EMBED_ENDPOINT_ENV: &str = "JURISRAG_EMBED_ENDPOINT";

impl EmbeddingConfig {
    /// Endpoint after applying the environment override.
    pub fn resolved_endpoint(&self) -> Option<String> {
        std::env::var(EMBED_ENDPOINT_ENV)
            .ok()
            .filter(|s| !s.is_empty())
            .or_else(|| self.endpoint.clone())
    }
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    input: &'a [String],
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum EmbedResponse {
    Wrapped { embeddings: Vec<Vec<f32>> },
    Bare(Vec<Vec<f32>>),
}

/// HTTP client for an embedding service.
///
/// Request body: `{"input": ["text", ...]}`. Response body: either a bare
/// JSON array of 768-float arrays or `{"embeddings": [[...], ...]}`.
pub struct HttpEmbedder {
    endpoint: String,
    retries: usize,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, retries: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            retries,
            agent,
        }
    }

    pub fn from_config(config: &EmbeddingConfig) -> Option<Self> {
        config.resolved_endpoint().map(|endpoint| {
            Self::new(endpoint, Duration::from_secs(config.timeout_secs), config.retries)
        })
    }

    fn attempt(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, Attempt> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(EmbedRequest { input: texts })
            .map_err(|e| Attempt::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        if status >= 500 || status == 429 {
            return Err(Attempt::Transient(format!("status {status}")));
        }
        if status >= 400 {
            return Err(Attempt::Fatal(format!("status {status}")));
        }
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Transient(e.to_string()))?;
        let parsed: EmbedResponse =
            serde_json::from_str(&body).map_err(|e| Attempt::Fatal(format!("bad response body: {e}")))?;
        Ok(match parsed {
            EmbedResponse::Wrapped { embeddings } => embeddings,
            EmbedResponse::Bare(v) => v,
        })
    }
}

enum Attempt {
    Transient(String),
    Fatal(String),
}

impl EmbeddingProvider for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let mut attempts = 0;
        let raw = loop {
            attempts += 1;
            match self.attempt(texts) {
                Ok(raw) => break raw,
                Err(Attempt::Transient(message)) if attempts <= self.retries => {
                    log_retry(&message);
                    continue;
                }
                Err(Attempt::Transient(message)) | Err(Attempt::Fatal(message)) => {
                    return Err(EmbeddingError::Remote {
                        failed: (0..texts.len()).collect(),
                        attempts,
                        message,
                    });
                }
            }
        };
        if raw.len() != texts.len() {
            return Err(EmbeddingError::BatchLength {
                expected: texts.len(),
                got: raw.len(),
            });
        }
        raw.into_iter().map(EmbeddingVector::new).collect()
    }
}

fn log_retry(message: &str) {
    if std::env::var_os("JURISRAG_DEBUG").is_some() {
        eprintln!("embedding request failed, retrying: {message}");
    }
}

/// Embed `texts` in batches of `batch_size`, running up to `max_in_flight`
/// batches concurrently. Output order matches input order.
pub fn embed_batch(
    provider: &dyn EmbeddingProvider,
    texts: &[String],
    batch_size: usize,
    max_in_flight: usize,
) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    if let Some(i) = texts.iter().position(|t| t.is_empty()) {
        return Err(EmbeddingError::EmptyText(i));
    }
    let batch_size = batch_size.max(1);
    let max_in_flight = max_in_flight.max(1);
    let batches: Vec<(usize, &[String])> = texts
        .chunks(batch_size)
        .enumerate()
        .map(|(i, b)| (i * batch_size, b))
        .collect();

    let mut out = Vec::with_capacity(texts.len());
    for wave in batches.chunks(max_in_flight) {
        let results: Vec<Result<Vec<EmbeddingVector>, EmbeddingError>> = std::thread::scope(|s| {
            let handles: Vec<_> = wave
                .iter()
                .map(|&(offset, batch)| {
                    s.spawn(move || {
                        provider.embed(batch).map_err(|e| shift_indices(e, offset)).and_then(|v| {
                            if v.len() == batch.len() {
                                Ok(v)
                            } else {
                                Err(EmbeddingError::BatchLength {
                                    expected: batch.len(),
                                    got: v.len(),
                                })
                            }
                        })
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("embedding worker panicked"))
                .collect()
        });
        for r in results {
            out.extend(r?);
        }
    }
    Ok(out)
}

fn shift_indices(err: EmbeddingError, offset: usize) -> EmbeddingError {
    match err {
        EmbeddingError::Remote {
            failed,
            attempts,
            message,
        } => EmbeddingError::Remote {
            failed: failed.into_iter().map(|i| i + offset).collect(),
            attempts,
            message,
        },
        EmbeddingError::EmptyText(i) => EmbeddingError::EmptyText(i + offset),
        other => other,
    }
}
