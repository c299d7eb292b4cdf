//! OpenAI-compatible `chat/completions` driver.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Map, Value};

use super::{FinishReason, LlmError, Message, ModelDriver, ModelRequest, ModelResponse, Role, Usage};
use crate::toolkit::ToolCall;

pub const ENDPOINT_ENV: &str = "ABB_MODEL_ENDPOINT";
pub const KEY_ENV: &str = "ABB_MODEL_KEY";

#[derive(Debug, Clone)]
pub struct LiveConfig {
    /// Base URL; `/chat/completions` is appended unless already present.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub request_timeout: Duration,
    /// Upper bound on concurrent requests across clones of one driver.
    pub max_in_flight: usize,
}

impl LiveConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        LiveConfig {
            endpoint: endpoint.into(),
            api_key: None,
            model: model.into(),
            request_timeout: Duration::from_secs(600),
            max_in_flight: 8,
        }
    }

    /// Reads the endpoint and key from the environment.
    pub fn from_env(model: impl Into<String>) -> Option<Self> {
        let endpoint = std::env::var(ENDPOINT_ENV).ok()?;
        let mut cfg = LiveConfig::new(endpoint, model);
        cfg.api_key = std::env::var(KEY_ENV).ok();
        Some(cfg)
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Debug, Default)]
struct Gate {
    busy: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self, max: usize) -> Permit<'_> {
        let mut busy = self.busy.lock().unwrap();
        while *busy >= max.max(1) {
            busy = self.freed.wait(busy).unwrap();
        }
        *busy += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.busy.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

/// Cloning shares the HTTP agent and the in-flight limit.
#[derive(Clone)]
pub struct LiveDriver {
    config: LiveConfig,
    agent: ureq::Agent,
    gate: Arc<Gate>,
    turn: usize,
}

impl LiveDriver {
    pub fn new(config: LiveConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(config.request_timeout)
            .build();
        LiveDriver {
            config,
            agent,
            gate: Arc::new(Gate::default()),
            turn: 0,
        }
    }

    /// A driver for another model sharing this one's connection pool and limit.
    pub fn with_model(&self, model: &str) -> Self {
        let mut d = self.clone();
        d.config.model = model.to_string();
        d.turn = 0;
        d
    }
}

fn wire_message(m: &Message) -> Value {
    match m.role {
        Role::Tool => json!({
            "role": "tool",
            "tool_call_id": m.tool_call_id,
            "content": m.content,
        }),
        Role::Assistant if !m.tool_calls.is_empty() => {
            let calls: Vec<Value> = m
                .tool_calls
                .iter()
                .map(|c| {
                    json!({
                        "id": c.id,
                        "type": "function",
                        "function": {
                            "name": c.name,
                            "arguments": Value::Object(c.arguments.clone()).to_string(),
                        }
                    })
                })
                .collect();
            json!({"role": "assistant", "content": m.content, "tool_calls": calls})
        }
        role => json!({
            "role": serde_json::to_value(role).unwrap(),
            "content": m.content,
        }),
    }
}

pub(crate) fn request_body(req: &ModelRequest, model: &str) -> Value {
    let mut messages = Vec::with_capacity(req.messages.len() + 1);
    if !req.system_prompt.is_empty() {
        messages.push(json!({"role": "system", "content": req.system_prompt}));
    }
    messages.extend(req.messages.iter().map(wire_message));
    let mut body = json!({
        "model": model,
        "messages": messages,
        "temperature": req.temperature,
    });
    if !req.tools.is_empty() {
        let tools: Vec<Value> = req
            .tools
            .iter()
            .map(|t| {
                json!({
                    "type": "function",
                    "function": {
                        "name": t.name,
                        "description": t.description,
                        "parameters": t.json_schema(),
                    }
                })
            })
            .collect();
        body["tools"] = Value::Array(tools);
    }
    if let Some(max) = req.max_output_tokens {
        body["max_tokens"] = json!(max);
    }
    body
}

pub(crate) fn parse_response(body: &Value) -> Result<ModelResponse, LlmError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| LlmError::Malformed("no choices".into()))?;
    let message = choice
        .get("message")
        .ok_or_else(|| LlmError::Malformed("choice without message".into()))?;
    let text = message
        .get("content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let mut tool_calls = Vec::new();
    for raw in message
        .get("tool_calls")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
    {
        let func = raw.get("function").cloned().unwrap_or(Value::Null);
        let name = func
            .get("name")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        let (arguments, parse_error) = match func.get("arguments") {
            Some(Value::String(s)) if s.trim().is_empty() => (Map::new(), None),
            Some(Value::String(s)) => match serde_json::from_str::<Value>(s) {
                Ok(Value::Object(m)) => (m, None),
                Ok(v) => (Map::new(), Some(format!("expected a JSON object, got {v}"))),
                Err(e) => (Map::new(), Some(e.to_string())),
            },
            Some(Value::Object(m)) => (m.clone(), None),
            None | Some(Value::Null) => (Map::new(), None),
            Some(v) => (Map::new(), Some(format!("expected a JSON object, got {v}"))),
        };
        tool_calls.push(ToolCall {
            id: raw.get("id").and_then(Value::as_str).unwrap_or_default().to_string(),
            name,
            arguments,
            parse_error,
        });
    }
    let usage = body.get("usage");
    let count = |key: &str| usage.and_then(|u| u.get(key)).and_then(Value::as_u64);
    let usage = match (count("prompt_tokens"), count("completion_tokens")) {
        (Some(i), Some(o)) => Usage {
            input_tokens: i,
            output_tokens: o,
            estimated: false,
        },
        _ => Usage::default(),
    };
    let finish_reason = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("stop") => FinishReason::Stop,
        Some("tool_calls") | Some("function_call") => FinishReason::ToolCalls,
        Some("length") => FinishReason::Length,
        _ if !tool_calls.is_empty() => FinishReason::ToolCalls,
        _ => FinishReason::Other,
    };
    Ok(ModelResponse {
        text,
        tool_calls,
        usage,
        finish_reason,
    })
}

impl ModelDriver for LiveDriver {
    fn model_id(&self) -> &str {
        &self.config.model
    }

    fn chat(&mut self, req: &ModelRequest) -> Result<ModelResponse, LlmError> {
        let body = request_body(req, &self.config.model);
        let mut http = self
            .agent
            .post(&self.config.url())
            .set("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            http = http.set("Authorization", &format!("Bearer {key}"));
        }
        let reply = {
            let _permit = self.gate.acquire(self.config.max_in_flight);
            http.send_json(body)
        };
        let json: Value = match reply {
            Ok(resp) => resp
                .into_json()
                .map_err(|e| LlmError::Malformed(e.to_string()))?,
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                return Err(LlmError::Transport {
                    status: Some(code),
                    message: crate::text::truncate_tail(&text, 2048),
                });
            }
            Err(ureq::Error::Transport(t)) => {
                return Err(LlmError::Transport {
                    status: None,
                    message: t.to_string(),
                })
            }
        };
        let mut resp = parse_response(&json)?;
        resp.ensure_call_ids(self.turn);
        self.turn += 1;
        Ok(resp)
    }
}
