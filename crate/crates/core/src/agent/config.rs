use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::toolkit::{resolve_tool_ids, ToolId, ToolsetPreset, ToolsetSelection};

/// Name of the hierarchical agent's delegation pseudo-tool.
pub const DELEGATE_TOOL: &str = "delegate_edit";

pub const DEFAULT_TEMPERATURE: f64 = 1.0;
/// Call budget used for tool-ablation runs.
pub const ABLATION_MAX_LLM_CALLS: u32 = 30;
pub const DEFAULT_SUB_AGENT_CALLS: u32 = 5;
/// Error-log bytes kept in the initial prompt.
pub const DEFAULT_LOG_BUDGET: usize = 16 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentPreset {
    CodingAssistant,
    ReadwriteOnly,
    Shell,
    Gradlefixer,
    Hierarchical,
    Custom,
}

impl AgentPreset {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentPreset::CodingAssistant => "coding_assistant",
            AgentPreset::ReadwriteOnly => "readwrite_only",
            AgentPreset::Shell => "shell",
            AgentPreset::Gradlefixer => "gradlefixer",
            AgentPreset::Hierarchical => "hierarchical",
            AgentPreset::Custom => "custom",
        }
    }

    /// The canonical tool names; `None` for `custom`.
    pub fn canonical_tools(self) -> Option<Vec<String>> {
        let toolset = match self {
            AgentPreset::CodingAssistant => ToolsetPreset::CodingAssistant,
            AgentPreset::ReadwriteOnly => ToolsetPreset::ReadwriteOnly,
            AgentPreset::Shell => ToolsetPreset::Shell,
            AgentPreset::Gradlefixer => ToolsetPreset::Gradlefixer,
            AgentPreset::Hierarchical => ToolsetPreset::Hierarchical,
            AgentPreset::Custom => return None,
        };
        let mut names = tool_names(&toolset.tools());
        if self == AgentPreset::Hierarchical {
            names.push(DELEGATE_TOOL.to_string());
        }
        Some(names)
    }
}

impl fmt::Display for AgentPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            AgentPreset::CodingAssistant,
            AgentPreset::ReadwriteOnly,
            AgentPreset::Shell,
            AgentPreset::Gradlefixer,
            AgentPreset::Hierarchical,
            AgentPreset::Custom,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
        .ok_or_else(|| format!("unknown agent preset `{s}`"))
    }
}

fn tool_names(ids: &[ToolId]) -> Vec<String> {
    ids.iter().map(|t| t.as_str().to_string()).collect()
}

/// Everything that determines an agent's behaviour, snapshotted into each
/// trajectory header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub preset: AgentPreset,
    /// Tool names in declaration order.
    pub toolset: Vec<String>,
    /// `None` means unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_llm_calls: Option<u32>,
    pub temperature: f64,
    /// Replaces the built-in system prompt when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_prompt_addendum: Option<String>,
    pub model_ref: String,
    #[serde(default = "default_sub_calls")]
    pub sub_agent_max_calls: u32,
    #[serde(default = "default_log_budget")]
    pub log_budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u32>,
}

fn default_sub_calls() -> u32 {
    DEFAULT_SUB_AGENT_CALLS
}

fn default_log_budget() -> usize {
    DEFAULT_LOG_BUDGET
}

impl AgentConfig {
    /// A named preset with main-run defaults (unlimited calls).
    pub fn preset(preset: AgentPreset, model_ref: impl Into<String>) -> Self {
        let toolset = preset.canonical_tools().unwrap_or_else(|| tool_names(&crate::toolkit::BASE_TOOLS));
        AgentConfig {
            preset,
            toolset,
            max_llm_calls: match preset {
                AgentPreset::CodingAssistant => Some(1),
                _ => None,
            },
            temperature: DEFAULT_TEMPERATURE,
            system_prompt: None,
            system_prompt_addendum: None,
            model_ref: model_ref.into(),
            sub_agent_max_calls: DEFAULT_SUB_AGENT_CALLS,
            log_budget: DEFAULT_LOG_BUDGET,
            max_output_tokens: None,
        }
    }

    /// Base tools plus `extra` tool names.
    pub fn custom(extra: &[String], model_ref: impl Into<String>) -> Result<Self, AgentError> {
        let ids = resolve_tool_ids(&ToolsetSelection::Custom(extra.to_vec()))?;
        let mut cfg = AgentConfig::preset(AgentPreset::Custom, model_ref);
        cfg.toolset = tool_names(&ids);
        Ok(cfg)
    }

    /// The agent for a toolset preset. Ablation-only toolsets become
    /// `custom` agents and get the ablation call budget.
    pub fn for_toolset(toolset: ToolsetPreset, model_ref: impl Into<String>) -> Self {
        let model_ref = model_ref.into();
        let preset = match toolset {
            ToolsetPreset::CodingAssistant => AgentPreset::CodingAssistant,
            ToolsetPreset::ReadwriteOnly => AgentPreset::ReadwriteOnly,
            ToolsetPreset::Shell => AgentPreset::Shell,
            ToolsetPreset::Gradlefixer => AgentPreset::Gradlefixer,
            ToolsetPreset::Hierarchical => AgentPreset::Hierarchical,
            _ => {
                let mut cfg = AgentConfig::preset(AgentPreset::Custom, model_ref);
                cfg.toolset = tool_names(&toolset.tools());
                cfg.max_llm_calls = Some(ABLATION_MAX_LLM_CALLS);
                return cfg;
            }
        };
        AgentConfig::preset(preset, model_ref)
    }

    /// A tool-ablation row: same tools as [`for_toolset`](Self::for_toolset), 30-call budget.
    pub fn ablation(toolset: ToolsetPreset, model_ref: impl Into<String>) -> Self {
        let mut cfg = AgentConfig::for_toolset(toolset, model_ref);
        cfg.max_llm_calls = Some(ABLATION_MAX_LLM_CALLS);
        cfg
    }

    pub fn with_max_llm_calls(mut self, max: Option<u32>) -> Self {
        self.max_llm_calls = max;
        self
    }

    /// Checks the preset/toolset invariants and tool names.
    pub fn validate(&self) -> Result<(), AgentError> {
        if let Some(canonical) = self.preset.canonical_tools() {
            if canonical != self.toolset {
                return Err(AgentError::Config(format!(
                    "preset {} requires toolset [{}], got [{}]",
                    self.preset,
                    canonical.join(", "),
                    self.toolset.join(", ")
                )));
            }
        }
        for name in &self.toolset {
            if name != DELEGATE_TOOL && name.parse::<ToolId>().is_err() {
                return Err(AgentError::Config(format!("unknown tool `{name}`")));
            }
        }
        if self.preset != AgentPreset::Hierarchical && self.toolset.iter().any(|t| t == DELEGATE_TOOL) {
            return Err(AgentError::Config(format!("{DELEGATE_TOOL} is only available to the hierarchical preset")));
        }
        if self.max_llm_calls == Some(0) {
            return Err(AgentError::Config("max_llm_calls must be positive".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(AgentError::Config("temperature must be >= 0".into()));
        }
        Ok(())
    }

    /// Real tools (excluding the delegation pseudo-tool).
    pub fn tool_ids(&self) -> Result<Vec<ToolId>, AgentError> {
        self.toolset
            .iter()
            .filter(|t| *t != DELEGATE_TOOL)
            .map(|t| t.parse::<ToolId>().map_err(AgentError::Config))
            .collect()
    }

    pub fn budget_reached(&self, calls_used: u32) -> bool {
        self.max_llm_calls.is_some_and(|max| calls_used >= max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_gradlefixer_has_no_shell() {
        for p in [
            AgentPreset::CodingAssistant,
            AgentPreset::ReadwriteOnly,
            AgentPreset::Shell,
            AgentPreset::Gradlefixer,
            AgentPreset::Hierarchical,
            AgentPreset::Custom,
        ] {
            AgentConfig::preset(p, "m").validate().unwrap();
        }
        let gf = AgentConfig::preset(AgentPreset::Gradlefixer, "m");
        assert!(!gf.toolset.iter().any(|t| t == "run_shell"));
        for t in ["gradle_build", "gradle_task", "set_java_version"] {
            assert!(gf.toolset.iter().any(|x| x == t));
        }
        assert_eq!(gf.max_llm_calls, None);
    }

    #[test]
    fn ablation_rows_get_thirty_calls() {
        for (_, row) in crate::toolkit::ablation_rows() {
            let cfg = AgentConfig::ablation(row, "m");
            assert_eq!(cfg.max_llm_calls, Some(30));
            cfg.validate().unwrap();
        }
        let only_b = AgentConfig::for_toolset(ToolsetPreset::OnlyGradleTask, "m");
        assert_eq!(only_b.preset, AgentPreset::Custom);
        assert_eq!(only_b.max_llm_calls, Some(30));
    }

    #[test]
    fn mismatched_toolset_is_rejected() {
        let mut cfg = AgentConfig::preset(AgentPreset::Gradlefixer, "m");
        cfg.toolset.push("run_shell".into());
        assert!(cfg.validate().is_err());
        let mut cfg = AgentConfig::preset(AgentPreset::Custom, "m");
        cfg.toolset.push(DELEGATE_TOOL.into());
        assert!(cfg.validate().is_err());
    }
}
