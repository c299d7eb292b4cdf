use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Every tool the registry knows how to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolId {
    ListDirectory,
    SearchFileContent,
    Glob,
    ReadFile,
    Replace,
    SearchGoogle,
    RunShell,
    GradleBuild,
    GradleTask,
    SetJavaVersion,
}

impl ToolId {
    pub const ALL: [ToolId; 10] = [
        ToolId::ListDirectory,
        ToolId::SearchFileContent,
        ToolId::Glob,
        ToolId::ReadFile,
        ToolId::Replace,
        ToolId::SearchGoogle,
        ToolId::RunShell,
        ToolId::GradleBuild,
        ToolId::GradleTask,
        ToolId::SetJavaVersion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolId::ListDirectory => "list_directory",
            ToolId::SearchFileContent => "search_file_content",
            ToolId::Glob => "glob",
            ToolId::ReadFile => "read_file",
            ToolId::Replace => "replace",
            ToolId::SearchGoogle => "search_google",
            ToolId::RunShell => "run_shell",
            ToolId::GradleBuild => "gradle_build",
            ToolId::GradleTask => "gradle_task",
            ToolId::SetJavaVersion => "set_java_version",
        }
    }

    /// Row label used in tool-usage tables.
    pub fn label(self) -> &'static str {
        match self {
            ToolId::ListDirectory => "LS",
            ToolId::SearchFileContent => "Grep",
            ToolId::Glob => "Glob",
            ToolId::ReadFile => "Read File",
            ToolId::Replace => "Replace",
            ToolId::SearchGoogle => "Google Search",
            ToolId::RunShell => "Shell",
            ToolId::GradleBuild => "Build (TOOL_A)",
            ToolId::GradleTask => "Gradle (TOOL_B)",
            ToolId::SetJavaVersion => "Java (TOOL_C)",
        }
    }

    pub fn is_domain_tool(self) -> bool {
        matches!(
            self,
            ToolId::GradleBuild | ToolId::GradleTask | ToolId::SetJavaVersion
        )
    }
}

impl fmt::Display for ToolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToolId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ToolId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown tool `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    String,
    Integer,
    Boolean,
    StringArray,
}

impl ParamType {
    fn accepts(self, value: &Value) -> bool {
        match self {
            ParamType::String => value.is_string(),
            ParamType::Integer => value.as_i64().is_some() || value.as_u64().is_some(),
            ParamType::Boolean => value.is_boolean(),
            ParamType::StringArray => value
                .as_array()
                .is_some_and(|items| items.iter().all(Value::is_string)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    pub description: String,
}

/// Declarative description of a tool as shown to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ParamSpec>,
}

impl ToolSpec {
    /// Checks required parameters, unknown parameters and value types.
    pub fn validate(&self, args: &Map<String, Value>) -> Result<(), String> {
        for param in &self.parameters {
            match args.get(&param.name) {
                None | Some(Value::Null) if param.required => {
                    return Err(format!("missing required parameter `{}`", param.name));
                }
                None | Some(Value::Null) => {}
                Some(v) if !param.ty.accepts(v) => {
                    return Err(format!(
                        "parameter `{}` must be {:?}, got {v}",
                        param.name, param.ty
                    ));
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = args
            .keys()
            .find(|k| !self.parameters.iter().any(|p| &p.name == *k))
        {
            return Err(format!("unknown parameter `{extra}`"));
        }
        Ok(())
    }

    /// JSON-schema object for provider function declarations.
    pub fn json_schema(&self) -> Value {
        let mut props = Map::new();
        for p in &self.parameters {
            let schema = match p.ty {
                ParamType::String => serde_json::json!({"type": "string"}),
                ParamType::Integer => serde_json::json!({"type": "integer"}),
                ParamType::Boolean => serde_json::json!({"type": "boolean"}),
                ParamType::StringArray => {
                    serde_json::json!({"type": "array", "items": {"type": "string"}})
                }
            };
            let mut schema = schema.as_object().cloned().unwrap_or_default();
            schema.insert("description".into(), Value::String(p.description.clone()));
            props.insert(p.name.clone(), Value::Object(schema));
        }
        let required: Vec<Value> = self
            .parameters
            .iter()
            .filter(|p| p.required)
            .map(|p| Value::String(p.name.clone()))
            .collect();
        serde_json::json!({
            "type": "object",
            "properties": props,
            "required": required,
        })
    }
}

/// A model-issued tool invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub arguments: Map<String, Value>,
    /// Set when the provider's argument payload could not be parsed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

impl ToolCall {
    pub fn new(id: impl Into<String>, name: impl Into<String>, arguments: Value) -> Self {
        ToolCall {
            id: id.into(),
            name: name.into(),
            arguments: arguments.as_object().cloned().unwrap_or_default(),
            parse_error: None,
        }
    }

    pub fn str_arg(&self, name: &str) -> Option<&str> {
        self.arguments.get(name).and_then(Value::as_str)
    }

    pub fn int_arg(&self, name: &str) -> Option<i64> {
        self.arguments.get(name).and_then(Value::as_i64)
    }

    pub fn bool_arg(&self, name: &str) -> Option<bool> {
        self.arguments.get(name).and_then(Value::as_bool)
    }

    pub fn str_list_arg(&self, name: &str) -> Vec<String> {
        self.arguments
            .get(name)
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolErrorKind {
    InvalidArguments,
    UnknownTool,
    OutsideWorkspace,
    NotFound,
    Rejected,
    Timeout,
    Environment,
    Io,
    Backend,
}

/// Observed output of one tool call. The payload is the raw output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub call_id: String,
    pub name: String,
    pub status: ToolStatus,
    pub payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<ToolErrorKind>,
    pub duration_ms: u64,
}

impl ToolResult {
    pub fn ok(call: &ToolCall, payload: impl Into<String>) -> Self {
        ToolResult {
            call_id: call.id.clone(),
            name: call.name.clone(),
            status: ToolStatus::Ok,
            payload: payload.into(),
            error_kind: None,
            duration_ms: 0,
        }
    }

    pub fn error(call: &ToolCall, kind: ToolErrorKind, payload: impl Into<String>) -> Self {
        ToolResult {
            call_id: call.id.clone(),
            name: call.name.clone(),
            status: ToolStatus::Error,
            payload: payload.into(),
            error_kind: Some(kind),
            duration_ms: 0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ToolStatus::Ok
    }
}
