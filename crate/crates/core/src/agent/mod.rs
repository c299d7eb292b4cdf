//! The repair agent: configuration, initial prompt, the episode loop and
//! its trajectory record.

mod config;
mod episode;
mod prompt;
mod trajectory;

use thiserror::Error;

use crate::toolkit::ToolkitError;

pub use config::{
    AgentConfig, AgentPreset, ABLATION_MAX_LLM_CALLS, DEFAULT_LOG_BUDGET, DEFAULT_SUB_AGENT_CALLS,
    DEFAULT_TEMPERATURE, DELEGATE_TOOL,
};
pub use episode::{
    agent_step, check_termination, delegate_spec, episode_id, run_episode, run_hierarchical_episode, Agent,
    EpisodeEnv, EpisodeState, Termination,
};
pub use prompt::{
    build_initial_prompt, directory_tree, extract_unified_diff, ERROR_HEADER, PATCH_INSTRUCTIONS, PATH_HEADER,
    SYSTEM_PROMPT, TOOL_USAGE_GUIDANCE, TREE_HEADER, TREE_MAX_DEPTH, TREE_MAX_ENTRIES,
};
pub use trajectory::{
    diff_jsonl, StepRecord, StepRole, SubOutcome, SubTrajectory, Trajectory, TrajectoryHeader, UsageTotals,
    Verdict, VerdictFlags, VerdictRecord, WORKSPACE_PLACEHOLDER,
};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Toolkit(#[from] ToolkitError),
}
