//! Answer-stage backends: a remote chat-completions client and a
//! deterministic offline mock.

use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use chainsift_core::decode::EvidenceChain;

use crate::config::QaConfig;
use crate::prompt::QaPromptBundle;

/// OpenAI-compatible chat completions client.
pub struct RemoteQaClient {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    max_tokens: usize,
    api_key: Option<String>,
    retries: usize,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    max_tokens: usize,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

impl RemoteQaClient {
    pub fn new(config: &QaConfig) -> Result<Self> {
        let endpoint = config.endpoint.clone().context("qa.endpoint is required")?;
        let model = config.model_name.clone().context("qa.model_name is required")?;
        let api_key = config.api_key_env.as_deref().and_then(|name| std::env::var(name).ok());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .new_agent();
        Ok(RemoteQaClient {
            agent,
            endpoint,
            model,
            max_tokens: config.max_output_tokens,
            api_key,
            retries: config.retries,
        })
    }

    pub fn complete(&self, system: &str, user: &str) -> Result<String> {
        let body = ChatRequest {
            model: &self.model,
            messages: vec![
                ChatMessage { role: "system", content: system },
                ChatMessage { role: "user", content: user },
            ],
            max_tokens: self.max_tokens,
            temperature: 0.0,
        };
        let mut attempt = 0;
        loop {
            let mut request = self.agent.post(&self.endpoint);
            if let Some(key) = &self.api_key {
                request = request.header("authorization", format!("Bearer {key}"));
            }
            let outcome = request.send_json(&body);
            match outcome {
                Ok(mut resp) => {
                    let parsed: ChatResponse =
                        resp.body_mut().read_json().context("parsing chat response")?;
                    let content = parsed
                        .choices
                        .into_iter()
                        .next()
                        .map(|c| c.message.content)
                        .ok_or_else(|| anyhow!("chat response carried no choices"))?;
                    return Ok(content);
                }
                Err(ureq::Error::StatusCode(code)) if (code == 429 || code >= 500) && attempt < self.retries => {
                    attempt += 1;
                    log::warn!("qa request failed with status {code} (attempt {attempt}); retrying");
                }
                Err(ureq::Error::StatusCode(code)) => bail!("qa endpoint returned status {code}"),
                Err(err) if attempt < self.retries => {
                    attempt += 1;
                    log::warn!("qa request failed: {err} (attempt {attempt}); retrying");
                }
                Err(err) => return Err(anyhow!(err).context("qa request failed")),
            }
        }
    }

    pub fn answer(&self, bundle: &QaPromptBundle) -> Result<String> {
        Ok(parse_answer(&self.complete(&bundle.system, &bundle.user)?))
    }

    /// Ask the model for newline-separated keyword entities.
    pub fn extract_entities(&self, instruction: &str, question: &str) -> Result<Vec<String>> {
        let raw = self.complete(instruction, question)?;
        let entities: Vec<String> =
            raw.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect();
        if entities.is_empty() {
            bail!("entity extraction returned no entities");
        }
        Ok(entities)
    }
}

/// Pull the text after the final "Answer:" marker; reasoning templates put
/// the verdict there. Without the marker the whole trimmed output stands.
pub fn parse_answer(raw: &str) -> String {
    match raw.rfind("Answer:") {
        Some(pos) => raw[pos + "Answer:".len()..].trim().to_string(),
        None => raw.trim().to_string(),
    }
}

/// Deterministic offline answerer: follow the best chain to its endpoint.
/// Stands in for a real model so full runs stay reproducible.
pub fn mock_answer(chains: &[EvidenceChain]) -> String {
    chains
        .first()
        .and_then(|chain| chain.steps.last())
        .map(|step| step.to_node().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chainsift_core::graph::OrientedTriple;
    use chainsift_core::ingest::Triple;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    fn spawn_chat_server(body: String) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            while let Ok((mut stream, _)) = listener.accept() {
                let mut buf = vec![0u8; 65536];
                let mut total = 0;
                loop {
                    let n = stream.read(&mut buf[total..]).unwrap_or(0);
                    if n == 0 {
                        break;
                    }
                    total += n;
                    let text = String::from_utf8_lossy(&buf[..total]);
                    if let Some(header_end) = text.find("\r\n\r\n") {
                        let content_length = text
                            .lines()
                            .find(|l| l.to_ascii_lowercase().starts_with("content-length:"))
                            .and_then(|l| l.split(':').nth(1))
                            .and_then(|v| v.trim().parse::<usize>().ok())
                            .unwrap_or(0);
                        if total >= header_end + 4 + content_length {
                            break;
                        }
                    }
                }
                let response = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        format!("http://{addr}/v1/chat/completions")
    }

    #[test]
    fn remote_client_parses_chat_response() {
        let endpoint = spawn_chat_server(
            r#"{"choices":[{"message":{"content":"Thought: follows.\nAnswer: Chris Evans"}}]}"#
                .into(),
        );
        let config = QaConfig {
            backend: crate::config::QaBackendKind::Remote,
            endpoint: Some(endpoint),
            model_name: Some("test".into()),
            ..QaConfig::default()
        };
        let client = RemoteQaClient::new(&config).unwrap();
        let bundle = QaPromptBundle { system: "sys".into(), user: "user".into() };
        assert_eq!(client.answer(&bundle).unwrap(), "Chris Evans");
    }

    #[test]
    fn remote_client_extracts_entities_line_by_line() {
        let endpoint = spawn_chat_server(
            r#"{"choices":[{"message":{"content":"The Newcomers\nChris Evans\n"}}]}"#.into(),
        );
        let config = QaConfig {
            backend: crate::config::QaBackendKind::Remote,
            endpoint: Some(endpoint),
            model_name: Some("test".into()),
            ..QaConfig::default()
        };
        let client = RemoteQaClient::new(&config).unwrap();
        let entities = client.extract_entities("instruction", "question").unwrap();
        assert_eq!(entities, vec!["The Newcomers", "Chris Evans"]);
    }

    #[test]
    fn parse_answer_extracts_final_marker() {
        assert_eq!(parse_answer("Thought: because.\nAnswer: Chris Evans"), "Chris Evans");
        assert_eq!(parse_answer("just the answer"), "just the answer");
        assert_eq!(parse_answer("Answer: a\nmore\nAnswer: b"), "b");
    }

    #[test]
    fn mock_answer_follows_best_chain() {
        let chain = EvidenceChain {
            chain_index: 0,
            text: "x".into(),
            total_logprob: 0.0,
            steps: vec![OrientedTriple {
                triple: Triple {
                    subject: "a".into(),
                    relation: "r".into(),
                    object: "b".into(),
                    source_doc_ids: ["d".to_string()].into(),
                },
                reversed: false,
            }],
        };
        assert_eq!(mock_answer(&[chain]), "b");
        assert_eq!(mock_answer(&[]), "unknown");
    }
}
