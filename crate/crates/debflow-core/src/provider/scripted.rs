//! Deterministic scripted provider for tests, hermetic fixtures, and replay.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{
    estimate_tokens, validate_request, ChatRequest, ChatResponse, Provider, ProviderError,
};

/// How a script entry decides whether it applies to a request. Matching
/// runs over [`ChatRequest::rendered_text`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Matches every request.
    Any,
    /// Matches when the rendered request contains the given text.
    Substring(String),
    /// Matches when the rendered request contains the marker `[key:<k>]`.
    /// Fixtures embed such markers in task inputs or templates to pin an
    /// entry to one specific call site.
    Key(String),
}

impl Matcher {
    pub fn matches(&self, rendered: &str) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::Substring(s) => rendered.contains(s.as_str()),
            Matcher::Key(k) => rendered.contains(&format!("[key:{k}]")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedFailure {
    Transport(String),
    RateLimited,
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedOutcome {
    Respond {
        response: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prompt_tokens: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        completion_tokens: Option<u64>,
    },
    Fail {
        error: ScriptedFailure,
    },
}

/// One script line: the first unconsumed entry whose matcher hits serves
/// the call and is then spent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    #[serde(flatten)]
    pub outcome: ScriptedOutcome,
}

impl ScriptEntry {
    pub fn respond(matcher: Matcher, response: impl Into<String>) -> Self {
        ScriptEntry {
            matcher,
            outcome: ScriptedOutcome::Respond {
                response: response.into(),
                prompt_tokens: None,
                completion_tokens: None,
            },
        }
    }

    pub fn fail(matcher: Matcher, failure: ScriptedFailure) -> Self {
        ScriptEntry {
            matcher,
            outcome: ScriptedOutcome::Fail { error: failure },
        }
    }
}

struct ScriptState {
    entries: Vec<ScriptEntry>,
    consumed: Vec<bool>,
}

/// Provider backed by an ordered script. Two runs over identical request
/// sequences produce identical response sequences.
pub struct ScriptedProvider {
    state: Mutex<ScriptState>,
    calls: AtomicU64,
}

impl ScriptedProvider {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let consumed = vec![false; entries.len()];
        ScriptedProvider {
            state: Mutex::new(ScriptState { entries, consumed }),
            calls: AtomicU64::new(0),
        }
    }

    /// Loads a script from its JSON form: an array of entries.
    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        let entries: Vec<ScriptEntry> = serde_json::from_str(json)?;
        Ok(ScriptedProvider::new(entries))
    }

    /// Total completed calls (successful or failed).
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    /// How many script entries have been consumed so far.
    pub fn consumed(&self) -> usize {
        let state = self.state.lock().unwrap();
        state.consumed.iter().filter(|c| **c).count()
    }

    pub fn remaining(&self) -> usize {
        let state = self.state.lock().unwrap();
        state.consumed.iter().filter(|c| !**c).count()
    }
}

impl Provider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        validate_request(request)?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let rendered = request.rendered_text();
        let mut state = self.state.lock().unwrap();
        let hit = state
            .entries
            .iter()
            .enumerate()
            .position(|(i, entry)| !state.consumed[i] && entry.matcher.matches(&rendered));
        let Some(index) = hit else {
            let mut summary: String = rendered.chars().take(160).collect();
            if rendered.len() > summary.len() {
                summary.push('…');
            }
            return Err(ProviderError::ScriptExhausted {
                request_summary: summary,
            });
        };
        state.consumed[index] = true;
        match state.entries[index].outcome.clone() {
            ScriptedOutcome::Respond {
                response,
                prompt_tokens,
                completion_tokens,
            } => Ok(ChatResponse {
                prompt_tokens: prompt_tokens.unwrap_or_else(|| estimate_tokens(&rendered)),
                completion_tokens: completion_tokens.unwrap_or_else(|| estimate_tokens(&response)),
                content: response,
                provider_latency_ms: 0,
            }),
            ScriptedOutcome::Fail { error } => Err(match error {
                ScriptedFailure::Transport(msg) => ProviderError::Transport(msg),
                ScriptedFailure::RateLimited => ProviderError::RateLimited,
                ScriptedFailure::Malformed(msg) => ProviderError::MalformedResponse(msg),
            }),
        }
    }

    fn name(&self) -> &str {
        "scripted"
    }
}
