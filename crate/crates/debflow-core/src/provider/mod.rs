//! Chat-completion providers.
//!
//! Everything the engine says to an LLM goes through [`Provider::complete`].
//! Two implementations ship: an HTTP client for OpenAI-compatible endpoints
//! and a deterministic scripted provider for tests, fixtures, and replay.
//! Wrappers add retry ([`Retrying`]) and cost accounting ([`Metered`]).

mod http;
mod ledger;
mod retry;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpConfig, HttpProvider};
pub use ledger::{
    LedgerSnapshot, Metered, ModelPrice, ModelUsage, PriceTable, UsageLedger, UsageObserver,
};
pub use retry::{with_retry, RetryPolicy, Retrying};
pub use scripted::{Matcher, ScriptEntry, ScriptedFailure, ScriptedOutcome, ScriptedProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        ChatRequest {
            model: model.into(),
            messages,
            temperature: 1.0,
            max_tokens: None,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    /// Flattens the conversation into the text matchers run against:
    /// one `role: content` line per message.
    pub fn rendered_text(&self) -> String {
        let mut out = String::new();
        for msg in &self.messages {
            let role = match msg.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            out.push_str(role);
            out.push_str(": ");
            out.push_str(&msg.content);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub provider_latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited")]
    RateLimited,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("script exhausted: no unconsumed entry matches request: {request_summary}")]
    ScriptExhausted { request_summary: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl ProviderError {
    /// Only transport failures and rate limits are worth retrying.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            ProviderError::Transport(_) | ProviderError::RateLimited
        )
    }
}

/// A chat-completion backend. Implementations must be callable from
/// concurrent executor branches.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;

    fn name(&self) -> &str;
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (**self).complete(request)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<P: Provider + ?Sized> Provider for &P {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (**self).complete(request)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Shared request checks: non-empty messages, the opening message from
/// system or user, and a non-negative temperature.
pub(crate) fn validate_request(request: &ChatRequest) -> Result<(), ProviderError> {
    if request.messages.is_empty() {
        return Err(ProviderError::InvalidRequest(
            "messages must be non-empty".into(),
        ));
    }
    if request.messages[0].role == Role::Assistant {
        return Err(ProviderError::InvalidRequest(
            "first message role must be system or user".into(),
        ));
    }
    if request.temperature < 0.0 || request.temperature.is_nan() {
        return Err(ProviderError::InvalidRequest(
            "temperature must be >= 0".into(),
        ));
    }
    Ok(())
}

/// Deterministic token estimate for providers that do not report usage:
/// whitespace-separated word count.
pub(crate) fn estimate_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_messages_are_invalid() {
        let req = ChatRequest::new("m", vec![]);
        assert!(matches!(
            validate_request(&req),
            Err(ProviderError::InvalidRequest(_))
        ));
    }

    #[test]
    fn assistant_first_is_invalid() {
        let req = ChatRequest::new("m", vec![ChatMessage::assistant("hi")]);
        assert!(validate_request(&req).is_err());
    }

    #[test]
    fn negative_temperature_is_invalid() {
        let req = ChatRequest::new("m", vec![ChatMessage::user("hi")]).with_temperature(-1.0);
        assert!(validate_request(&req).is_err());
    }

    #[test]
    fn rendered_text_is_role_prefixed() {
        let req = ChatRequest::new(
            "m",
            vec![ChatMessage::system("be brief"), ChatMessage::user("hello")],
        );
        assert_eq!(req.rendered_text(), "system: be brief\nuser: hello\n");
    }
}
