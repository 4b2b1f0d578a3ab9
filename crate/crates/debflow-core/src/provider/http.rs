//! OpenAI-compatible HTTP chat provider.
//!
//! Speaks `POST <base_url>/chat/completions` with the standard JSON body
//! (`model`, `messages`, `temperature`, `max_tokens`). The credential comes
//! from `DEBFLOW_API_KEY` and the base URL from configuration or
//! `DEBFLOW_BASE_URL`.

use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{validate_request, ChatRequest, ChatResponse, Provider, ProviderError, Role};

pub const API_KEY_ENV: &str = "DEBFLOW_API_KEY";
pub const BASE_URL_ENV: &str = "DEBFLOW_BASE_URL";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    /// Per-call timeout; a timed-out node is a provider failure.
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        HttpConfig {
            base_url: base_url.into(),
            api_key: None,
            timeout: Duration::from_secs(120),
        }
    }

    /// Reads `DEBFLOW_BASE_URL` and `DEBFLOW_API_KEY`. Fails when no base
    /// URL is configured anywhere.
    pub fn from_env(base_url_override: Option<&str>) -> Result<Self, ProviderError> {
        let base_url = match base_url_override {
            Some(url) => url.to_string(),
            None => std::env::var(BASE_URL_ENV).map_err(|_| {
                ProviderError::InvalidRequest(format!(
                    "no base URL: set {BASE_URL_ENV} or pass one in configuration"
                ))
            })?,
        };
        let mut config = HttpConfig::new(base_url);
        config.api_key = std::env::var(API_KEY_ENV).ok();
        Ok(config)
    }
}

pub struct HttpProvider {
    config: HttpConfig,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct ApiResponse {
    choices: Vec<ApiChoice>,
    #[serde(default)]
    usage: Option<ApiUsage>,
}

#[derive(Deserialize)]
struct ApiChoice {
    message: ApiMessage,
}

#[derive(Deserialize)]
struct ApiMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct ApiUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> Self {
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build();
        HttpProvider {
            agent: agent_config.into(),
            config,
        }
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    fn body_for(&self, request: &ChatRequest) -> String {
        let messages: Vec<serde_json::Value> = request
            .messages
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::System => "system",
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                json!({ "role": role, "content": m.content })
            })
            .collect();
        let mut body = json!({
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
        });
        if let Some(max_tokens) = request.max_tokens {
            body["max_tokens"] = json!(max_tokens);
        }
        body.to_string()
    }
}

impl Provider for HttpProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        validate_request(request)?;
        let body = self.body_for(request);
        let started = Instant::now();

        let mut req = self
            .agent
            .post(self.endpoint())
            .header("content-type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("authorization", format!("Bearer {key}"));
        }
        let mut response = req
            .send(body.as_bytes())
            .map_err(|e| ProviderError::Transport(e.to_string()))?;

        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let latency_ms = started.elapsed().as_millis() as u64;

        if status == 429 {
            return Err(ProviderError::RateLimited);
        }
        if !(200..300).contains(&status) {
            let snippet: String = text.chars().take(200).collect();
            return Err(ProviderError::Transport(format!(
                "HTTP {status}: {snippet}"
            )));
        }

        let parsed: ApiResponse = serde_json::from_str(&text)
            .map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
        let content = parsed
            .choices
            .first()
            .and_then(|c| c.message.content.clone())
            .ok_or_else(|| {
                ProviderError::MalformedResponse(
                    "response has no choices[0].message.content".into(),
                )
            })?;
        let usage = parsed.usage.unwrap_or_default();
        Ok(ChatResponse {
            content,
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            provider_latency_ms: latency_ms,
        })
    }

    fn name(&self) -> &str {
        "http"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{with_retry, ChatMessage, RetryPolicy};
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// Minimal one-thread HTTP server answering a fixed sequence of
    /// (status, body) responses, one connection each.
    fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<()>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = Vec::new();
                let mut chunk = [0u8; 4096];
                let mut content_length = 0usize;
                let mut header_end = 0usize;
                loop {
                    let n = stream.read(&mut chunk).unwrap();
                    if n == 0 {
                        break;
                    }
                    buf.extend_from_slice(&chunk[..n]);
                    if header_end == 0 {
                        if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                            header_end = pos + 4;
                            let headers = String::from_utf8_lossy(&buf[..pos]);
                            for line in headers.lines() {
                                if let Some(v) = line
                                    .to_ascii_lowercase()
                                    .strip_prefix("content-length:")
                                    .map(str::trim)
                                    .map(String::from)
                                {
                                    content_length = v.parse().unwrap_or(0);
                                }
                            }
                        }
                    }
                    if header_end > 0 && buf.len() >= header_end + content_length {
                        break;
                    }
                }
                let reason = if status == 200 { "OK" } else { "ERR" };
                let reply = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}"), handle)
    }

    fn ok_body(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": 7, "completion_tokens": 3}
        })
        .to_string()
    }

    fn request() -> ChatRequest {
        ChatRequest::new("test-model", vec![ChatMessage::user("ping")])
    }

    #[test]
    fn successful_completion_parses_content_and_usage() {
        let (base, handle) = serve(vec![(200, ok_body("pong"))]);
        let provider = HttpProvider::new(HttpConfig::new(base));
        let resp = provider.complete(&request()).unwrap();
        assert_eq!(resp.content, "pong");
        assert_eq!(resp.prompt_tokens, 7);
        assert_eq!(resp.completion_tokens, 3);
        handle.join().unwrap();
    }

    #[test]
    fn rate_limited_twice_then_success_with_retry() {
        let (base, handle) = serve(vec![
            (429, "{}".to_string()),
            (429, "{}".to_string()),
            (200, ok_body("made it")),
        ]);
        let provider = with_retry(
            HttpProvider::new(HttpConfig::new(base)),
            RetryPolicy {
                max_attempts: 3,
                backoff_base_ms: 1,
            },
        );
        let resp = provider.complete(&request()).unwrap();
        assert_eq!(resp.content, "made it");
        assert_eq!(provider.retries(), 2);
        handle.join().unwrap();
    }

    #[test]
    fn garbage_body_is_malformed_response() {
        let (base, handle) = serve(vec![(200, "not json".to_string())]);
        let provider = HttpProvider::new(HttpConfig::new(base));
        assert!(matches!(
            provider.complete(&request()),
            Err(ProviderError::MalformedResponse(_))
        ));
        handle.join().unwrap();
    }

    #[test]
    fn server_error_is_transport() {
        let (base, handle) = serve(vec![(500, "{}".to_string())]);
        let provider = HttpProvider::new(HttpConfig::new(base));
        assert!(matches!(
            provider.complete(&request()),
            Err(ProviderError::Transport(_))
        ));
        handle.join().unwrap();
    }
}
