//! Remote embedding backend speaking the common embeddings-over-HTTP shape.
//!
//! Request:  `POST <endpoint>` with `{"model": .., "input": [..texts..]}`.
//! Response: `{"data": [{"embedding": [floats], "index": n?}, ..]}`.
//!
//! Vectors are re-normalized on receipt. A wrong dimension coming back is a
//! fatal configuration error; transport failures and 5xx/429 statuses are
//! retried up to the configured count and surface as retryable errors.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingBackend, EmbeddingConfig, EmbeddingVector};

pub struct RemoteHttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    dim: usize,
    retries: usize,
    in_flight: Gate,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedItem>,
}

#[derive(Deserialize)]
struct EmbedItem {
    embedding: Vec<f32>,
    #[serde(default)]
    index: Option<usize>,
}

impl RemoteHttpBackend {
    pub fn from_config(config: &EmbeddingConfig) -> Result<Self, EmbedError> {
        config.validate()?;
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| EmbedError::Config("remote-http backend requires endpoint".into()))?;
        let model = config
            .model_name
            .clone()
            .ok_or_else(|| EmbedError::Config("remote-http backend requires model_name".into()))?;
        let api_key = config
            .api_key_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .new_agent();
        Ok(RemoteHttpBackend {
            agent,
            endpoint,
            model,
            api_key,
            dim: config.dim,
            retries: config.retries,
            in_flight: Gate::new(config.max_in_flight.max(1)),
        })
    }

    fn request_once(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let _slot = self.in_flight.acquire();
        let body = EmbedRequest { model: &self.model, input: texts };
        let mut request = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("authorization", format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(map_ureq_error)?;
        let parsed: EmbedResponse = response
            .body_mut()
            .read_json()
            .map_err(|err| EmbedError::Http {
                status: None,
                retryable: false,
                message: format!("invalid response body: {err}"),
            })?;
        if parsed.data.len() != texts.len() {
            return Err(EmbedError::Http {
                status: None,
                retryable: false,
                message: format!(
                    "endpoint returned {} embeddings for {} inputs",
                    parsed.data.len(),
                    texts.len()
                ),
            });
        }
        let mut items = parsed.data;
        if items.iter().all(|item| item.index.is_some()) {
            items.sort_by_key(|item| item.index.unwrap_or(usize::MAX));
        }
        items
            .into_iter()
            .map(|item| {
                if item.embedding.len() != self.dim {
                    return Err(EmbedError::Config(format!(
                        "endpoint returned dimension {} but config expects {}",
                        item.embedding.len(),
                        self.dim
                    )));
                }
                EmbeddingVector::new(item.embedding)?.normalized()
            })
            .collect()
    }
}

impl EmbeddingBackend for RemoteHttpBackend {
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut attempt = 0;
        loop {
            match self.request_once(texts) {
                Ok(vectors) => return Ok(vectors),
                Err(err) if err.is_retryable() && attempt < self.retries => {
                    attempt += 1;
                    log::warn!("embedding request failed (attempt {attempt}): {err}; retrying");
                }
                Err(err) => return Err(err),
            }
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn cache_namespace(&self) -> String {
        format!("remote-http/{}/{}", self.endpoint, self.model)
    }
}

fn map_ureq_error(err: ureq::Error) -> EmbedError {
    match err {
        ureq::Error::StatusCode(code) => EmbedError::Http {
            status: Some(code),
            retryable: code == 429 || code >= 500,
            message: format!("http status {code}"),
        },
        other => EmbedError::Http { status: None, retryable: true, message: other.to_string() },
    }
}

/// Counting gate bounding concurrent remote requests.
struct Gate {
    state: Mutex<usize>,
    available: Condvar,
}

struct GateSlot<'a>(&'a Gate);

impl Gate {
    fn new(permits: usize) -> Self {
        Gate { state: Mutex::new(permits), available: Condvar::new() }
    }

    fn acquire(&self) -> GateSlot<'_> {
        let mut permits = self.state.lock().expect("gate poisoned");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("gate poisoned");
        }
        *permits -= 1;
        GateSlot(self)
    }
}

impl Drop for GateSlot<'_> {
    fn drop(&mut self) {
        let mut permits = self.0.state.lock().expect("gate poisoned");
        *permits += 1;
        self.0.available.notify_one();
    }
}
