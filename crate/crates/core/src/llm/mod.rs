//! Provider-neutral chat-with-tools interface.
//!
//! The agent loop only sees [`ModelRequest`] and [`ModelResponse`]. Drivers
//! translate to a provider ([`LiveDriver`]) or read canned turns from a
//! script ([`ReplayDriver`]).

mod live;
mod replay;

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::toolkit::{ToolCall, ToolSpec};

pub use live::{LiveConfig, LiveDriver, ENDPOINT_ENV, KEY_ENV};
pub use replay::{prompt_hash, ReplayDriver, ReplayScript, ReplayTurn, ScriptedToolCall};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
            name: None,
        }
    }

    pub fn assistant(content: impl Into<String>, tool_calls: Vec<ToolCall>) -> Self {
        Message {
            role: Role::Assistant,
            content: content.into(),
            tool_calls,
            tool_call_id: None,
            name: None,
        }
    }

    pub fn tool(call_id: &str, name: &str, content: impl Into<String>) -> Self {
        Message {
            role: Role::Tool,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: Some(call_id.to_string()),
            name: Some(name.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub model: String,
    pub system_prompt: String,
    pub messages: Vec<Message>,
    /// Declarations of the active toolset only.
    pub tools: Vec<ToolSpec>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// True when the counts come from the 4-characters-per-token estimate.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub estimated: bool,
}

impl Usage {
    pub fn add(&mut self, other: Usage) {
        self.input_tokens += other.input_tokens;
        self.output_tokens += other.output_tokens;
        self.estimated |= other.estimated;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    ToolCalls,
    Length,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub tool_calls: Vec<ToolCall>,
    pub usage: Usage,
    pub finish_reason: FinishReason,
}

impl ModelResponse {
    /// Gives every tool call a non-empty id unique within the response.
    pub(crate) fn ensure_call_ids(&mut self, turn: usize) {
        let mut seen = std::collections::HashSet::new();
        for (i, call) in self.tool_calls.iter_mut().enumerate() {
            if call.id.is_empty() || !seen.insert(call.id.clone()) {
                call.id = format!("call_{turn}_{i}");
                seen.insert(call.id.clone());
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport { status: Option<u16>, message: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("replay script exhausted at turn {turn}")]
    ScriptExhausted { turn: usize },
    #[error("replay guard mismatch at turn {turn}: expected prompt hash {expected}, got {actual}")]
    GuardMismatch {
        turn: usize,
        expected: String,
        actual: String,
    },
    #[error("invalid replay script: {0}")]
    Script(String),
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Transport { .. })
    }
}

/// A chat-with-tools session. One driver value serves one episode at a time.
pub trait ModelDriver: Send {
    fn model_id(&self) -> &str;
    fn chat(&mut self, req: &ModelRequest) -> Result<ModelResponse, LlmError>;
}

impl<T: ModelDriver + ?Sized> ModelDriver for Box<T> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn chat(&mut self, req: &ModelRequest) -> Result<ModelResponse, LlmError> {
        (**self).chat(req)
    }
}

/// Transport retry schedule: `attempts` tries with doubling backoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff_ms: 500,
        }
    }
}

/// Calls the driver, retrying transport failures per `policy`.
///
/// Returns the response and the number of attempts made.
pub fn chat_completion(
    driver: &mut dyn ModelDriver,
    req: &ModelRequest,
    policy: RetryPolicy,
) -> Result<(ModelResponse, u32), LlmError> {
    let attempts = policy.attempts.max(1);
    let mut backoff = Duration::from_millis(policy.initial_backoff_ms);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match driver.chat(req) {
            Ok(resp) => return Ok((resp, attempt)),
            Err(err) if err.is_retryable() && attempt < attempts => {
                warn!(attempt, %err, "model call failed, retrying");
                thread::sleep(backoff);
                backoff *= 2;
            }
            Err(err) => return Err(err),
        }
    }
}

/// Deterministic token estimate: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// Estimated input tokens of a request (system prompt, messages, tool calls
/// and tool declarations).
pub fn estimate_request_tokens(req: &ModelRequest) -> u64 {
    let mut total = estimate_tokens(&req.system_prompt);
    for m in &req.messages {
        total += estimate_tokens(&m.content);
        for c in &m.tool_calls {
            total += estimate_tokens(&c.name) + estimate_tokens(&serde_json::Value::Object(c.arguments.clone()).to_string());
        }
    }
    for t in &req.tools {
        total += estimate_tokens(&serde_json::to_string(t).unwrap_or_default());
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flaky {
        failures: u32,
        calls: u32,
    }

    impl ModelDriver for Flaky {
        fn model_id(&self) -> &str {
            "flaky"
        }

        fn chat(&mut self, _req: &ModelRequest) -> Result<ModelResponse, LlmError> {
            self.calls += 1;
            if self.calls <= self.failures {
                return Err(LlmError::Transport {
                    status: Some(503),
                    message: "unavailable".into(),
                });
            }
            Ok(ModelResponse {
                text: "ok".into(),
                tool_calls: vec![],
                usage: Usage::default(),
                finish_reason: FinishReason::Stop,
            })
        }
    }

    fn req() -> ModelRequest {
        ModelRequest {
            model: "m".into(),
            system_prompt: String::new(),
            messages: vec![],
            tools: vec![],
            temperature: 1.0,
            max_output_tokens: None,
        }
    }

    const FAST: RetryPolicy = RetryPolicy {
        attempts: 3,
        initial_backoff_ms: 0,
    };

    #[test]
    fn transient_failures_are_retried() {
        let mut d = Flaky { failures: 2, calls: 0 };
        let (_, attempts) = chat_completion(&mut d, &req(), FAST).unwrap();
        assert_eq!(attempts, 3);
    }

    #[test]
    fn gives_up_after_three_attempts() {
        let mut d = Flaky { failures: 5, calls: 0 };
        assert!(chat_completion(&mut d, &req(), FAST).is_err());
        assert_eq!(d.calls, 3);
    }

    #[test]
    fn estimate_rounds_up() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcd"), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
    }
}
