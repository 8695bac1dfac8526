//! Vector embeddings behind one interface with interchangeable backends.
//!
//! Two backends are provided: a deterministic local backend (a bag of hashed
//! tokens, see [`DeterministicBackend`]) that makes every similarity
//! threshold in the pipeline reproducible without a model download, and a
//! remote HTTP backend speaking the common embeddings-over-HTTP shape
//! (`POST {model, input: [..]}` returning `{data: [{embedding: [..]}]}`).
//!
//! All vectors are L2-normalized at the provider boundary, so cosine
//! similarity reduces to a dot product. Results are memoized in an LRU cache
//! keyed by (backend, model, exact text); the cache never changes values,
//! only avoids recomputation.

mod deterministic;
mod remote;

pub use deterministic::DeterministicBackend;
pub(crate) use deterministic::fnv1a64;
pub use remote::RemoteHttpBackend;

use std::num::NonZeroUsize;
use std::sync::Mutex;

use lru::LruCache;
use serde::{Deserialize, Serialize};

/// A fixed-dimension embedding with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, EmbedError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite { index });
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| *v as f64 * *v as f64).sum::<f64>().sqrt()
    }

    /// Scale to unit length. Errors on the zero vector.
    pub fn normalized(&self) -> Result<Self, EmbedError> {
        let norm = self.l2_norm();
        if norm == 0.0 {
            return Err(EmbedError::ZeroNorm);
        }
        let values = self.values.iter().map(|v| (*v as f64 / norm) as f32).collect();
        Ok(EmbeddingVector { values })
    }
}

/// Cosine similarity in `[-1, 1]`, accumulated in f64.
///
/// A zero-norm argument yields 0.0 (no directional agreement) rather than
/// NaN; the result is clamped so rounding never escapes the interval.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimMismatch { left: a.dim(), right: b.dim() });
    }
    let mut dot = 0.0f64;
    for (x, y) in a.values.iter().zip(&b.values) {
        dot += *x as f64 * *y as f64;
    }
    let denom = a.l2_norm() * b.l2_norm();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyTextInput,
    #[error("entity list must be non-empty")]
    EmptyEntityList,
    #[error("non-finite embedding component at index {index}")]
    NonFinite { index: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("zero-norm vector cannot be normalized")]
    ZeroNorm,
    #[error("embedding configuration error: {0}")]
    Config(String),
    #[error("embedding endpoint error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Http { status: Option<u16>, retryable: bool, message: String },
}

impl EmbedError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, EmbedError::Http { retryable: true, .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingBackendKind {
    #[serde(rename = "deterministic-local")]
    DeterministicLocal,
    #[serde(rename = "remote-http")]
    RemoteHttp,
}

/// Provider configuration. The remote backend additionally requires
/// `endpoint` and `model_name`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub backend: EmbeddingBackendKind,
    pub dim: usize,
    pub cache_capacity: usize,
    pub endpoint: Option<String>,
    pub model_name: Option<String>,
    /// Name of the environment variable holding the endpoint API key.
    pub api_key_env: Option<String>,
    /// Upper bound on concurrent remote requests.
    pub max_in_flight: usize,
    /// Retries for retryable remote failures.
    pub retries: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            backend: EmbeddingBackendKind::DeterministicLocal,
            dim: 256,
            cache_capacity: 4096,
            endpoint: None,
            model_name: None,
            api_key_env: None,
            max_in_flight: 4,
            retries: 2,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dim == 0 {
            return Err(EmbedError::Config("dim must be positive".into()));
        }
        if self.backend == EmbeddingBackendKind::RemoteHttp
            && (self.endpoint.is_none() || self.model_name.is_none())
        {
            return Err(EmbedError::Config(
                "remote-http backend requires endpoint and model_name".into(),
            ));
        }
        Ok(())
    }
}

/// One embedding backend behind [`EmbeddingProvider`].
pub trait EmbeddingBackend: Send + Sync {
    /// Embed a batch of non-empty texts, one unit-norm vector per text.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn dim(&self) -> usize;

    /// Identity string mixed into cache keys (backend name + model).
    fn cache_namespace(&self) -> String;
}

/// Embedding entry point used by the rest of the pipeline: a backend plus an
/// LRU memo. Safe for concurrent use; the cache serializes internally.
pub struct EmbeddingProvider {
    backend: Box<dyn EmbeddingBackend>,
    cache: Option<Mutex<LruCache<String, EmbeddingVector>>>,
    namespace: String,
}

impl EmbeddingProvider {
    pub fn new(backend: Box<dyn EmbeddingBackend>, cache_capacity: usize) -> Self {
        let namespace = backend.cache_namespace();
        let cache = NonZeroUsize::new(cache_capacity).map(|cap| Mutex::new(LruCache::new(cap)));
        EmbeddingProvider { backend, cache, namespace }
    }

    pub fn from_config(config: &EmbeddingConfig) -> Result<Self, EmbedError> {
        config.validate()?;
        let backend: Box<dyn EmbeddingBackend> = match config.backend {
            EmbeddingBackendKind::DeterministicLocal => {
                Box::new(DeterministicBackend::new(config.dim))
            }
            EmbeddingBackendKind::RemoteHttp => Box::new(RemoteHttpBackend::from_config(config)?),
        };
        Ok(EmbeddingProvider::new(backend, config.cache_capacity))
    }

    pub fn dim(&self) -> usize {
        self.backend.dim()
    }

    /// Embed texts in order. Cached entries are returned as-is; misses are
    /// batched into one backend call.
    pub fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        for text in texts {
            if text.trim().is_empty() {
                return Err(EmbedError::EmptyTextInput);
            }
        }
        let mut out: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        let mut miss_indices = Vec::new();
        if let Some(cache) = &self.cache {
            let mut cache = cache.lock().expect("embedding cache poisoned");
            for (i, text) in texts.iter().enumerate() {
                match cache.get(&self.cache_key(text)) {
                    Some(hit) => out[i] = Some(hit.clone()),
                    None => miss_indices.push(i),
                }
            }
        } else {
            miss_indices.extend(0..texts.len());
        }

        if !miss_indices.is_empty() {
            let miss_texts: Vec<&str> = miss_indices.iter().map(|&i| texts[i]).collect();
            let vectors = self.backend.embed_batch(&miss_texts)?;
            if vectors.len() != miss_texts.len() {
                return Err(EmbedError::Config(format!(
                    "backend returned {} vectors for {} texts",
                    vectors.len(),
                    miss_texts.len()
                )));
            }
            if let Some(cache) = &self.cache {
                let mut cache = cache.lock().expect("embedding cache poisoned");
                for (&i, vector) in miss_indices.iter().zip(&vectors) {
                    cache.put(self.cache_key(texts[i]), vector.clone());
                }
            }
            for (&i, vector) in miss_indices.iter().zip(vectors.iter()) {
                out[i] = Some(vector.clone());
            }
        }

        Ok(out.into_iter().map(|v| v.expect("all indices filled")).collect())
    }

    pub fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.embed(&[text])?.pop().expect("one vector for one text"))
    }

    /// Unit-normalized arithmetic mean of the entities' embeddings.
    pub fn aggregate_entity_embedding(&self, entities: &[&str]) -> Result<EmbeddingVector, EmbedError> {
        if entities.is_empty() {
            return Err(EmbedError::EmptyEntityList);
        }
        let vectors = self.embed(entities)?;
        let dim = vectors[0].dim();
        let mut mean = vec![0.0f64; dim];
        for vector in &vectors {
            for (acc, v) in mean.iter_mut().zip(vector.values()) {
                *acc += *v as f64;
            }
        }
        let n = vectors.len() as f64;
        let mean: Vec<f32> = mean.into_iter().map(|v| (v / n) as f32).collect();
        EmbeddingVector::new(mean)?.normalized()
    }

    fn cache_key(&self, text: &str) -> String {
        format!("{}\u{1f}{}", self.namespace, text)
    }
}
