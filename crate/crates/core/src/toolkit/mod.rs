//! Tool registry, toolset presets and tool implementations.
//!
//! File tools operate on the workspace directory directly and refuse paths
//! that resolve outside it. Command tools go through the workspace's sandbox
//! backend and return its raw output.

mod exec_tools;
mod fs_tools;
pub mod paths;
mod presets;
mod search;
mod spec;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::sandbox::{BuildOutcome, Sandbox, Workspace};
use crate::text::truncate_tail;

pub use exec_tools::{classify_shell_command, validate_gradle_flags, validate_gradle_task, ShellIntent};
pub use presets::{
    ablation_rows, builtin_spec, resolve_tool_ids, resolve_toolset, ToolsetPreset, ToolsetSelection,
    BASE_TOOLS,
};
pub use search::{FixtureSearch, OfflineSearch, SearchBackend, OFFLINE_SEARCH_PAYLOAD};
pub use spec::{ParamSpec, ParamType, ToolCall, ToolErrorKind, ToolId, ToolResult, ToolSpec, ToolStatus};

/// Per-result payload budget (tail kept).
pub const DEFAULT_PAYLOAD_BUDGET: usize = 64 * 1024;

#[derive(Debug, Error)]
pub enum ToolkitError {
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("unknown toolset preset `{0}`")]
    UnknownPreset(String),
    #[error("duplicate tool `{0}` in registry")]
    Duplicate(String),
}

#[derive(Debug, Clone, Copy)]
pub struct ToolLimits {
    pub payload_budget: usize,
    pub shell_timeout: Duration,
    /// Default line window for read_file.
    pub read_lines: usize,
}

impl Default for ToolLimits {
    fn default() -> Self {
        ToolLimits {
            payload_budget: DEFAULT_PAYLOAD_BUDGET,
            shell_timeout: crate::sandbox::DEFAULT_COMMAND_TIMEOUT,
            read_lines: 2000,
        }
    }
}

/// Everything a tool may touch during one call.
pub struct ToolContext<'a> {
    pub sandbox: &'a Sandbox,
    pub workspace: &'a mut Workspace,
    pub search: &'a dyn SearchBackend,
    pub limits: ToolLimits,
}

/// A tool result plus the build it ran, when it ran one.
#[derive(Debug, Clone)]
pub struct ToolExecution {
    pub result: ToolResult,
    pub build: Option<BuildOutcome>,
}

impl From<ToolResult> for ToolExecution {
    fn from(result: ToolResult) -> Self {
        ToolExecution {
            result,
            build: None,
        }
    }
}

/// Immutable set of tool declarations for one toolset.
#[derive(Debug, Clone)]
pub struct ToolRegistry {
    specs: BTreeMap<ToolId, ToolSpec>,
    order: Vec<ToolId>,
}

impl ToolRegistry {
    pub fn new(ids: &[ToolId]) -> Result<Self, ToolkitError> {
        let mut specs = BTreeMap::new();
        for id in ids {
            if specs.insert(*id, builtin_spec(*id)).is_some() {
                return Err(ToolkitError::Duplicate(id.to_string()));
            }
        }
        Ok(ToolRegistry {
            specs,
            order: ids.to_vec(),
        })
    }

    pub fn from_selection(selection: &ToolsetSelection) -> Result<Self, ToolkitError> {
        Self::new(&resolve_tool_ids(selection)?)
    }

    pub fn ids(&self) -> &[ToolId] {
        &self.order
    }

    /// Declarations in toolset order.
    pub fn specs(&self) -> Vec<ToolSpec> {
        self.order.iter().map(|id| self.specs[id].clone()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        name.parse::<ToolId>().is_ok_and(|id| self.specs.contains_key(&id))
    }

    /// Validates and dispatches a call. Never panics on model input; every
    /// failure becomes an error result.
    pub fn execute(&self, call: &ToolCall, ctx: &mut ToolContext<'_>) -> ToolExecution {
        let started = Instant::now();
        let mut exec = self.dispatch(call, ctx);
        exec.result.duration_ms = started.elapsed().as_millis() as u64;
        exec
    }

    fn dispatch(&self, call: &ToolCall, ctx: &mut ToolContext<'_>) -> ToolExecution {
        let Some(id) = call
            .name
            .parse::<ToolId>()
            .ok()
            .filter(|id| self.specs.contains_key(id))
        else {
            return ToolResult::error(
                call,
                ToolErrorKind::UnknownTool,
                format!("unknown tool: {}", call.name),
            )
            .into();
        };
        if let Some(err) = &call.parse_error {
            return ToolResult::error(
                call,
                ToolErrorKind::InvalidArguments,
                format!("invalid arguments: {err}"),
            )
            .into();
        }
        if let Err(msg) = self.specs[&id].validate(&call.arguments) {
            return ToolResult::error(
                call,
                ToolErrorKind::InvalidArguments,
                format!("invalid arguments: {msg}"),
            )
            .into();
        }
        let mut exec = match id {
            ToolId::ListDirectory => fs_tools::list_directory(call, ctx).into(),
            ToolId::SearchFileContent => fs_tools::search_file_content(call, ctx).into(),
            ToolId::Glob => fs_tools::glob(call, ctx).into(),
            ToolId::ReadFile => fs_tools::read_file(call, ctx).into(),
            ToolId::Replace => fs_tools::replace(call, ctx).into(),
            ToolId::SearchGoogle => search::search_google(call, ctx).into(),
            ToolId::RunShell => exec_tools::run_shell(call, ctx).into(),
            ToolId::GradleBuild => exec_tools::gradle_build(call, ctx),
            ToolId::GradleTask => exec_tools::gradle_task(call, ctx).into(),
            ToolId::SetJavaVersion => exec_tools::set_java_version(call, ctx).into(),
        };
        exec.result.payload = truncate_tail(&exec.result.payload, ctx.limits.payload_budget);
        exec
    }
}

/// Executes one call against a toolset.
pub fn execute_tool(registry: &ToolRegistry, call: &ToolCall, ctx: &mut ToolContext<'_>) -> ToolExecution {
    registry.execute(call, ctx)
}
