//! Deterministic driver that plays back a recorded script of model turns.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{
    estimate_request_tokens, estimate_tokens, FinishReason, LlmError, ModelDriver, ModelRequest,
    ModelResponse, Usage,
};
use crate::toolkit::ToolCall;

/// Tool call as written in a script. `arguments` may be an object or a
/// JSON-encoded string, mirroring what providers emit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedToolCall {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub name: String,
    #[serde(default)]
    pub arguments: Value,
}

impl ScriptedToolCall {
    fn to_call(&self) -> ToolCall {
        let id = self.id.clone().unwrap_or_default();
        let (arguments, parse_error) = match &self.arguments {
            Value::Null => (Default::default(), None),
            Value::Object(map) => (map.clone(), None),
            Value::String(raw) => match serde_json::from_str::<Value>(raw) {
                Ok(Value::Object(map)) => (map, None),
                Ok(other) => (Default::default(), Some(format!("expected a JSON object, got {other}"))),
                Err(e) => (Default::default(), Some(e.to_string())),
            },
            other => (Default::default(), Some(format!("expected a JSON object, got {other}"))),
        };
        ToolCall {
            id,
            name: self.name.clone(),
            arguments,
            parse_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayTurn {
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub tool_calls: Vec<ScriptedToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    /// Expected [`prompt_hash`] of the request this turn answers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayScript {
    #[serde(default = "default_model")]
    pub model: String,
    pub turns: Vec<ReplayTurn>,
}

fn default_model() -> String {
    "replay".to_string()
}

impl ReplayScript {
    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        serde_json::from_str(text).map_err(|e| LlmError::Script(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Script(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// SHA-256 (hex) of the content of the last message in a request; the empty
/// string's digest when there are no messages.
pub fn prompt_hash(req: &ModelRequest) -> String {
    let last = req.messages.last().map(|m| m.content.as_str()).unwrap_or("");
    hex::encode(Sha256::digest(last.as_bytes()))
}

/// Plays turns in order. Never touches the network.
#[derive(Debug, Clone)]
pub struct ReplayDriver {
    script: Arc<ReplayScript>,
    cursor: usize,
}

impl ReplayDriver {
    pub fn new(script: ReplayScript) -> Self {
        Self::shared(Arc::new(script))
    }

    pub fn shared(script: Arc<ReplayScript>) -> Self {
        ReplayDriver { script, cursor: 0 }
    }

    /// Turns consumed so far.
    pub fn position(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.script.turns.len() - self.cursor
    }
}

impl ModelDriver for ReplayDriver {
    fn model_id(&self) -> &str {
        &self.script.model
    }

    fn chat(&mut self, req: &ModelRequest) -> Result<ModelResponse, LlmError> {
        let turn_no = self.cursor;
        let Some(turn) = self.script.turns.get(turn_no) else {
            return Err(LlmError::ScriptExhausted { turn: turn_no });
        };
        if let Some(expected) = &turn.prompt_hash {
            let actual = prompt_hash(req);
            if &actual != expected {
                return Err(LlmError::GuardMismatch {
                    turn: turn_no,
                    expected: expected.clone(),
                    actual,
                });
            }
        }
        self.cursor += 1;
        let tool_calls: Vec<ToolCall> = turn.tool_calls.iter().map(ScriptedToolCall::to_call).collect();
        let usage = turn.usage.unwrap_or_else(|| {
            let out_chars: u64 = estimate_tokens(&turn.text)
                + tool_calls
                    .iter()
                    .map(|c| {
                        estimate_tokens(&c.name)
                            + estimate_tokens(&Value::Object(c.arguments.clone()).to_string())
                    })
                    .sum::<u64>();
            Usage {
                input_tokens: estimate_request_tokens(req),
                output_tokens: out_chars,
                estimated: true,
            }
        });
        let finish_reason = if tool_calls.is_empty() {
            FinishReason::Stop
        } else {
            FinishReason::ToolCalls
        };
        let mut resp = ModelResponse {
            text: turn.text.clone(),
            tool_calls,
            usage,
            finish_reason,
        };
        resp.ensure_call_ids(turn_no);
        Ok(resp)
    }
}
