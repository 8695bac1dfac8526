//! Next-token scorers for the constrained decoder.
//!
//! The decoder hands a scorer the prompt context, the generated prefix, and
//! the set of allowed token ids; the scorer returns log-probabilities for a
//! subset of the allowed set. Three backends:
//!
//! - [`MockTableScorer`]: fixed per-token table, for tests.
//! - [`SeededScorer`]: pseudo-random but pure in (seed, prefix, token), for
//!   fuzzing; scores do not depend on call order.
//! - [`RemoteCompletionScorer`]: an HTTP completions endpoint returning
//!   top-n token log-probabilities. Remote APIs cannot apply a true logit
//!   mask, so responses are intersected with the allowed set client-side;
//!   when nothing intersects, the step falls back to a uniform distribution
//!   over the allowed tokens and the event is counted. Chain faithfulness is
//!   unaffected — only score fidelity degrades, and visibly so.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::tokenizer::{TokenId, Tokenizer};
use super::DecodeError;
use crate::embed::fnv1a64;

pub trait TokenScorer: Send + Sync {
    /// Log-probabilities for the next token, restricted to `allowed`.
    /// Returned keys must be a subset of `allowed`; values must be finite.
    fn next_token_logprobs(
        &self,
        context: &str,
        prefix: &[TokenId],
        allowed: &[TokenId],
    ) -> Result<BTreeMap<TokenId, f64>, DecodeError>;
}

/// Fixed per-token log-probability table; unlisted tokens get the default.
#[derive(Debug, Clone)]
pub struct MockTableScorer {
    table: BTreeMap<TokenId, f64>,
    default_logprob: f64,
}

impl MockTableScorer {
    pub fn new(table: BTreeMap<TokenId, f64>, default_logprob: f64) -> Self {
        MockTableScorer { table, default_logprob }
    }

    /// Every token scores 0.0: ranking degenerates to the tie-break rule.
    pub fn uniform() -> Self {
        MockTableScorer { table: BTreeMap::new(), default_logprob: 0.0 }
    }
}

impl TokenScorer for MockTableScorer {
    fn next_token_logprobs(
        &self,
        _context: &str,
        _prefix: &[TokenId],
        allowed: &[TokenId],
    ) -> Result<BTreeMap<TokenId, f64>, DecodeError> {
        Ok(allowed
            .iter()
            .map(|&t| (t, self.table.get(&t).copied().unwrap_or(self.default_logprob)))
            .collect())
    }
}

/// Pseudo-random scorer: each (seed, prefix, token) hashes to a fixed value
/// in (-10, 0]. Pure, so beams can be explored in any order.
#[derive(Debug, Clone, Copy)]
pub struct SeededScorer {
    seed: u64,
}

impl SeededScorer {
    pub fn new(seed: u64) -> Self {
        SeededScorer { seed }
    }

    pub fn logprob(&self, prefix: &[TokenId], token: TokenId) -> f64 {
        let mut bytes = Vec::with_capacity(8 + prefix.len() * 4 + 4);
        bytes.extend_from_slice(&self.seed.to_le_bytes());
        for t in prefix {
            bytes.extend_from_slice(&t.to_le_bytes());
        }
        bytes.extend_from_slice(&token.to_le_bytes());
        let unit = (fnv1a64(&bytes) >> 11) as f64 / (1u64 << 53) as f64;
        -10.0 * unit
    }
}

impl TokenScorer for SeededScorer {
    fn next_token_logprobs(
        &self,
        _context: &str,
        prefix: &[TokenId],
        allowed: &[TokenId],
    ) -> Result<BTreeMap<TokenId, f64>, DecodeError> {
        Ok(allowed.iter().map(|&t| (t, self.logprob(prefix, t))).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteScorerConfig {
    pub endpoint: Option<String>,
    pub model_name: Option<String>,
    /// How many top token log-probabilities to request per step.
    pub top_logprobs: usize,
    /// Name of the environment variable holding the endpoint API key.
    pub api_key_env: Option<String>,
    pub retries: usize,
    /// Strings the remote model may use to signal end-of-sequence.
    pub eos_aliases: Vec<String>,
}

impl Default for RemoteScorerConfig {
    fn default() -> Self {
        RemoteScorerConfig {
            endpoint: None,
            model_name: None,
            top_logprobs: 20,
            api_key_env: None,
            retries: 2,
            eos_aliases: vec!["</s>".into(), "<|endoftext|>".into(), "<|end_of_text|>".into()],
        }
    }
}

/// Scores steps by querying a completions endpoint for top-n logprobs of the
/// single next token, then mapping returned token strings onto allowed ids
/// via the paired tokenizer.
pub struct RemoteCompletionScorer {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    top_logprobs: usize,
    api_key: Option<String>,
    retries: usize,
    eos_aliases: Vec<String>,
    tokenizer: Arc<dyn Tokenizer>,
    fallback_events: AtomicUsize,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: usize,
    temperature: f64,
    logprobs: usize,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    logprobs: Option<ChoiceLogprobs>,
}

#[derive(Deserialize)]
struct ChoiceLogprobs {
    top_logprobs: Vec<BTreeMap<String, f64>>,
}

impl RemoteCompletionScorer {
    pub fn new(config: &RemoteScorerConfig, tokenizer: Arc<dyn Tokenizer>) -> Result<Self, DecodeError> {
        let endpoint = config.endpoint.clone().ok_or_else(|| {
            DecodeError::ScorerViolation("remote scorer requires an endpoint".into())
        })?;
        let model = config.model_name.clone().ok_or_else(|| {
            DecodeError::ScorerViolation("remote scorer requires a model_name".into())
        })?;
        let api_key = config.api_key_env.as_deref().and_then(|name| std::env::var(name).ok());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .new_agent();
        Ok(RemoteCompletionScorer {
            agent,
            endpoint,
            model,
            top_logprobs: config.top_logprobs.max(1),
            api_key,
            retries: config.retries,
            eos_aliases: config.eos_aliases.clone(),
            tokenizer,
            fallback_events: AtomicUsize::new(0),
        })
    }

    /// Steps where no returned top-n token was allowed and the scorer fell
    /// back to a uniform distribution.
    pub fn fallback_count(&self) -> usize {
        self.fallback_events.load(Ordering::Relaxed)
    }

    fn query_top(&self, prompt: &str) -> Result<BTreeMap<String, f64>, DecodeError> {
        let body = CompletionRequest {
            model: &self.model,
            prompt,
            max_tokens: 1,
            temperature: 0.0,
            logprobs: self.top_logprobs,
        };
        let mut attempt = 0;
        loop {
            let mut request = self.agent.post(&self.endpoint);
            if let Some(key) = &self.api_key {
                request = request.header("authorization", format!("Bearer {key}"));
            }
            let result = request.send_json(&body).map_err(map_ureq_error).and_then(|mut resp| {
                let parsed: CompletionResponse =
                    resp.body_mut().read_json().map_err(|err| DecodeError::Http {
                        status: None,
                        retryable: false,
                        message: format!("invalid response body: {err}"),
                    })?;
                let top = parsed
                    .choices
                    .into_iter()
                    .next()
                    .and_then(|c| c.logprobs)
                    .and_then(|l| l.top_logprobs.into_iter().next())
                    .ok_or_else(|| DecodeError::Http {
                        status: None,
                        retryable: false,
                        message: "response carried no top_logprobs".into(),
                    })?;
                Ok(top)
            });
            match result {
                Ok(top) => return Ok(top),
                Err(DecodeError::Http { retryable: true, .. }) if attempt < self.retries => {
                    attempt += 1;
                    log::warn!("scorer request failed (attempt {attempt}); retrying");
                }
                Err(err) => return Err(err),
            }
        }
    }
}

impl TokenScorer for RemoteCompletionScorer {
    fn next_token_logprobs(
        &self,
        context: &str,
        prefix: &[TokenId],
        allowed: &[TokenId],
    ) -> Result<BTreeMap<TokenId, f64>, DecodeError> {
        let decoded_prefix = self.tokenizer.decode(prefix);
        let prompt = if decoded_prefix.is_empty() {
            format!("{context}\n")
        } else {
            format!("{context}\n{decoded_prefix}")
        };
        let top = self.query_top(&prompt)?;

        let eos = self.tokenizer.eos_id();
        let mut result = BTreeMap::new();
        for &token in allowed {
            if token == eos {
                // Match any configured end-of-sequence alias.
                if let Some(lp) = self
                    .eos_aliases
                    .iter()
                    .filter_map(|alias| top.get(alias))
                    .fold(None::<f64>, |acc, lp| Some(acc.map_or(*lp, |a| a.max(*lp))))
                {
                    result.insert(token, lp);
                }
                continue;
            }
            let piece = self.tokenizer.decode(&[token]);
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            // Remote tokens often carry leading whitespace; compare trimmed.
            if let Some(lp) = top
                .iter()
                .filter(|(text, _)| text.trim() == piece)
                .map(|(_, lp)| *lp)
                .fold(None::<f64>, |acc, lp| Some(acc.map_or(lp, |a| a.max(lp))))
            {
                result.insert(token, lp);
            }
        }

        if result.is_empty() {
            self.fallback_events.fetch_add(1, Ordering::Relaxed);
            log::warn!(
                "no returned token was allowed at this step; falling back to uniform over {} tokens",
                allowed.len()
            );
            let uniform = -(allowed.len() as f64).ln();
            return Ok(allowed.iter().map(|&t| (t, uniform)).collect());
        }
        Ok(result)
    }
}

fn map_ureq_error(err: ureq::Error) -> DecodeError {
    match err {
        ureq::Error::StatusCode(code) => DecodeError::Http {
            status: Some(code),
            retryable: code == 429 || code >= 500,
            message: format!("http status {code}"),
        },
        other => DecodeError::Http { status: None, retryable: true, message: other.to_string() },
    }
}
