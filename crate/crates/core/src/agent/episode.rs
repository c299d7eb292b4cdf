use std::time::Instant;

use serde_json::json;

use super::config::{AgentConfig, AgentPreset, DELEGATE_TOOL};
use super::prompt::{build_initial_prompt, delegate_prompt, extract_unified_diff, PATCH_INSTRUCTIONS, SYSTEM_PROMPT};
use super::trajectory::{
    usage_of, StepRecord, StepRole, SubOutcome, SubTrajectory, Trajectory, TrajectoryHeader, UsageTotals,
    Verdict, VerdictFlags, VerdictRecord,
};
use super::AgentError;
use crate::benchmark::ProblemInstance;
use crate::git::Git;
use crate::llm::{chat_completion, LlmError, Message, ModelDriver, ModelRequest, ModelResponse, RetryPolicy};
use crate::sandbox::{BuildOutcome, BuildStatus, Sandbox, Workspace};
use crate::toolkit::{
    ParamSpec, ParamType, SearchBackend, ToolCall, ToolContext, ToolErrorKind, ToolId, ToolLimits, ToolRegistry,
    ToolResult, ToolSpec,
};

/// Shared, read-only services an episode runs against.
pub struct EpisodeEnv<'a> {
    pub sandbox: &'a Sandbox,
    pub search: &'a dyn SearchBackend,
    pub limits: ToolLimits,
    pub retry: RetryPolicy,
    /// Digest of the fixture the episode replays, recorded in the header.
    pub fixture_hash: Option<String>,
}

impl<'a> EpisodeEnv<'a> {
    pub fn new(sandbox: &'a Sandbox, search: &'a dyn SearchBackend) -> Self {
        EpisodeEnv {
            sandbox,
            search,
            limits: ToolLimits::default(),
            retry: RetryPolicy::default(),
            fixture_hash: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Continue,
    VerifyAndStop,
    StopBudget,
}

/// Mutable state of a running episode.
#[derive(Debug)]
pub struct EpisodeState {
    pub messages: Vec<Message>,
    pub llm_calls_used: u32,
    pub workspace: Workspace,
    pub last_build: Option<BuildOutcome>,
    pub terminal: Option<Verdict>,
    pub steps: Vec<StepRecord>,
    pub delegated_usage: UsageTotals,
    /// Tool-call count of the latest model turn; `None` before the first turn.
    pub last_turn_tool_calls: Option<usize>,
}

impl EpisodeState {
    pub fn new(workspace: Workspace, initial_prompt: String) -> Self {
        let mut state = EpisodeState {
            messages: Vec::new(),
            llm_calls_used: 0,
            workspace,
            last_build: None,
            terminal: None,
            steps: Vec::new(),
            delegated_usage: UsageTotals::default(),
            last_turn_tool_calls: None,
        };
        push_user(&mut state.steps, &initial_prompt);
        state.messages.push(Message::user(initial_prompt));
        state
    }
}

/// A tool-free model turn ends the episode (verification follows) even when
/// it used the last permitted call; otherwise a spent budget stops it.
pub fn check_termination(state: &EpisodeState, config: &AgentConfig) -> Termination {
    if state.last_turn_tool_calls == Some(0) {
        Termination::VerifyAndStop
    } else if config.budget_reached(state.llm_calls_used) {
        Termination::StopBudget
    } else {
        Termination::Continue
    }
}

pub fn delegate_spec() -> ToolSpec {
    ToolSpec {
        name: DELEGATE_TOOL.to_string(),
        description: "Hands a code edit to an editing sub-agent that can read and replace text in files. \
                      Returns the sub-agent's summary of what it changed."
            .to_string(),
        parameters: vec![
            ParamSpec {
                name: "instructions".into(),
                ty: ParamType::String,
                required: true,
                description: "What to change and why, precise enough to act on without further context.".into(),
            },
            ParamSpec {
                name: "file_paths".into(),
                ty: ParamType::StringArray,
                required: false,
                description: "Files the edit concerns, relative to the project root.".into(),
            },
        ],
    }
}

/// A configured agent: its toolset, tool declarations and system prompt.
pub struct Agent<'a> {
    pub config: &'a AgentConfig,
    pub env: &'a EpisodeEnv<'a>,
    registry: ToolRegistry,
    tools: Vec<ToolSpec>,
    system_prompt: String,
}

impl<'a> Agent<'a> {
    pub fn new(config: &'a AgentConfig, env: &'a EpisodeEnv<'a>) -> Result<Self, AgentError> {
        config.validate()?;
        let registry = ToolRegistry::new(&config.tool_ids()?)?;
        let mut tools = registry.specs();
        if config.preset == AgentPreset::Hierarchical {
            tools.push(delegate_spec());
        }
        let mut system_prompt = config.system_prompt.clone().unwrap_or_else(|| SYSTEM_PROMPT.to_string());
        if let Some(extra) = &config.system_prompt_addendum {
            system_prompt.push_str("\n\n");
            system_prompt.push_str(extra);
        }
        Ok(Agent {
            config,
            env,
            registry,
            tools,
            system_prompt,
        })
    }

    fn request(&self, messages: &[Message], tools: Vec<ToolSpec>) -> ModelRequest {
        ModelRequest {
            model: self.config.model_ref.clone(),
            system_prompt: self.system_prompt.clone(),
            messages: messages.to_vec(),
            tools,
            temperature: self.config.temperature,
            max_output_tokens: self.config.max_output_tokens,
        }
    }
}

fn push_user(steps: &mut Vec<StepRecord>, content: &str) {
    steps.push(StepRecord {
        seq: steps.len(),
        role: StepRole::User,
        content: content.to_string(),
        tool_calls: Vec::new(),
        tool_result: None,
        tokens_in: 0,
        tokens_out: 0,
        wall_ms: 0,
        estimated: false,
        delegated: None,
    });
}

fn push_model_turn(steps: &mut Vec<StepRecord>, resp: &ModelResponse, wall_ms: u64) {
    steps.push(StepRecord {
        seq: steps.len(),
        role: StepRole::Assistant,
        content: resp.text.clone(),
        tool_calls: resp.tool_calls.clone(),
        tool_result: None,
        tokens_in: resp.usage.input_tokens,
        tokens_out: resp.usage.output_tokens,
        wall_ms,
        estimated: resp.usage.estimated,
        delegated: None,
    });
}

fn push_tool_result(
    steps: &mut Vec<StepRecord>,
    messages: &mut Vec<Message>,
    result: ToolResult,
    delegated: Option<SubTrajectory>,
) {
    let content = if result.is_ok() {
        result.payload.clone()
    } else {
        format!("Error: {}", result.payload)
    };
    messages.push(Message::tool(&result.call_id, &result.name, content.clone()));
    steps.push(StepRecord {
        seq: steps.len(),
        role: StepRole::Tool,
        content,
        tool_calls: Vec::new(),
        wall_ms: result.duration_ms,
        tool_result: Some(result),
        tokens_in: 0,
        tokens_out: 0,
        estimated: false,
        delegated: delegated.map(Box::new),
    });
}

/// One model call, then every tool call of the reply dispatched in order.
pub fn agent_step(state: &mut EpisodeState, agent: &Agent<'_>, driver: &mut dyn ModelDriver) -> Result<(), LlmError> {
    let req = agent.request(&state.messages, agent.tools.clone());
    let started = Instant::now();
    let (resp, _) = chat_completion(driver, &req, agent.env.retry)?;
    state.llm_calls_used += 1;
    push_model_turn(&mut state.steps, &resp, started.elapsed().as_millis() as u64);
    state
        .messages
        .push(Message::assistant(resp.text.clone(), resp.tool_calls.clone()));
    state.last_turn_tool_calls = Some(resp.tool_calls.len());

    for call in &resp.tool_calls {
        if call.name == DELEGATE_TOOL && agent.config.preset == AgentPreset::Hierarchical {
            let started = Instant::now();
            let (mut result, sub) = run_delegate(call, &mut state.workspace, agent, driver);
            result.duration_ms = started.elapsed().as_millis() as u64;
            if let Some(sub) = &sub {
                state.delegated_usage.add(sub.usage);
            }
            push_tool_result(&mut state.steps, &mut state.messages, result, sub);
            continue;
        }
        let mut ctx = ToolContext {
            sandbox: agent.env.sandbox,
            workspace: &mut state.workspace,
            search: agent.env.search,
            limits: agent.env.limits,
        };
        let exec = agent.registry.execute(call, &mut ctx);
        if let Some(build) = exec.build {
            state.last_build = Some(build);
        }
        push_tool_result(&mut state.steps, &mut state.messages, exec.result, None);
    }
    Ok(())
}

/// Runs a `delegate_edit` call as a nested episode restricted to
/// `read_file` and `replace`.
fn run_delegate(
    call: &ToolCall,
    workspace: &mut Workspace,
    agent: &Agent<'_>,
    driver: &mut dyn ModelDriver,
) -> (ToolResult, Option<SubTrajectory>) {
    let spec = delegate_spec();
    if let Some(err) = &call.parse_error {
        return (
            ToolResult::error(call, ToolErrorKind::InvalidArguments, format!("invalid arguments: {err}")),
            None,
        );
    }
    if let Err(msg) = spec.validate(&call.arguments) {
        return (
            ToolResult::error(call, ToolErrorKind::InvalidArguments, format!("invalid arguments: {msg}")),
            None,
        );
    }
    let instructions = call.str_arg("instructions").unwrap_or_default().trim().to_string();
    if instructions.is_empty() {
        return (
            ToolResult::error(call, ToolErrorKind::InvalidArguments, "empty instructions"),
            None,
        );
    }
    let file_paths = call.str_list_arg("file_paths");
    let registry = ToolRegistry::new(&[ToolId::ReadFile, ToolId::Replace]).expect("distinct tools");
    let budget = agent.config.sub_agent_max_calls.max(1);
    let prompt = delegate_prompt(&instructions, &file_paths);
    let mut steps = Vec::new();
    push_user(&mut steps, &prompt);
    let mut messages = vec![Message::user(prompt)];
    let mut calls = 0;
    let mut edited: Vec<String> = Vec::new();
    let (outcome, text) = loop {
        if calls >= budget {
            break (SubOutcome::BudgetExhausted, String::new());
        }
        let req = agent.request(&messages, registry.specs());
        let started = Instant::now();
        let resp = match chat_completion(driver, &req, agent.env.retry) {
            Ok((resp, _)) => resp,
            Err(e) => break (SubOutcome::Error, e.to_string()),
        };
        calls += 1;
        push_model_turn(&mut steps, &resp, started.elapsed().as_millis() as u64);
        messages.push(Message::assistant(resp.text.clone(), resp.tool_calls.clone()));
        if resp.tool_calls.is_empty() {
            break (SubOutcome::Completed, resp.text);
        }
        for sub_call in &resp.tool_calls {
            let mut ctx = ToolContext {
                sandbox: agent.env.sandbox,
                workspace: &mut *workspace,
                search: agent.env.search,
                limits: agent.env.limits,
            };
            let exec = registry.execute(sub_call, &mut ctx);
            if exec.result.is_ok() && sub_call.name == ToolId::Replace.as_str() {
                if let Some(p) = sub_call.str_arg("file_path") {
                    if !edited.iter().any(|e| e == p) {
                        edited.push(p.to_string());
                    }
                }
            }
            push_tool_result(&mut steps, &mut messages, exec.result, None);
        }
    };
    let edits = if edited.is_empty() {
        "none".to_string()
    } else {
        edited.join(", ")
    };
    let summary = match outcome {
        SubOutcome::Completed => format!("Sub-agent finished after {calls} call(s). Files edited: {edits}.\n{text}"),
        SubOutcome::BudgetExhausted => format!(
            "Sub-agent stopped at its budget of {budget} call(s) before finishing. Files edited so far: {edits}."
        ),
        SubOutcome::Error => format!("Sub-agent failed: {text}. Files edited before the failure: {edits}."),
    };
    let usage = usage_of(&steps);
    let result = if outcome == SubOutcome::Error {
        ToolResult::error(call, ToolErrorKind::Backend, summary.clone())
    } else {
        ToolResult::ok(call, summary.clone())
    };
    let sub = SubTrajectory {
        instructions,
        file_paths,
        max_llm_calls: budget,
        steps,
        usage,
        outcome,
        summary,
    };
    (result, Some(sub))
}

/// Clean build whose result alone decides the verdict.
fn verify(state: &mut EpisodeState, sandbox: &Sandbox) -> (Verdict, VerdictFlags, Option<String>) {
    let (_reset, build) = sandbox.clean_build(&mut state.workspace);
    let mut flags = VerdictFlags::default();
    let (verdict, diagnostic) = match build.status {
        BuildStatus::Success => (Verdict::Resolved, None),
        BuildStatus::Failure => (Verdict::UnresolvedGaveUp, None),
        BuildStatus::Timeout => {
            flags.timeout = true;
            (Verdict::UnresolvedGaveUp, Some("verification build timed out".to_string()))
        }
        BuildStatus::EnvError => {
            flags.env_error = true;
            (Verdict::Error, Some(format!("verification build could not run: {}", build.log)))
        }
    };
    state.last_build = Some(build);
    (verdict, flags, diagnostic)
}

/// One-shot patch proposal: a single tool-free model call whose diff the
/// harness applies before verifying.
fn run_patch_mode(state: &mut EpisodeState, agent: &Agent<'_>, driver: &mut dyn ModelDriver) -> Result<(), LlmError> {
    let req = agent.request(&state.messages, Vec::new());
    let started = Instant::now();
    let (resp, _) = chat_completion(driver, &req, agent.env.retry)?;
    state.llm_calls_used += 1;
    push_model_turn(&mut state.steps, &resp, started.elapsed().as_millis() as u64);
    state.messages.push(Message::assistant(resp.text.clone(), Vec::new()));
    state.last_turn_tool_calls = Some(0);
    let call = ToolCall::new("patch-0", "apply_patch", json!({}));
    let started = Instant::now();
    let mut result = match extract_unified_diff(&resp.text) {
        None => ToolResult::error(&call, ToolErrorKind::InvalidArguments, "no unified diff found in the reply"),
        Some(patch) => match Git::apply_patch(state.workspace.root(), &patch, false) {
            Ok(()) => ToolResult::ok(&call, "patch applied"),
            Err(e) => ToolResult::error(&call, ToolErrorKind::Rejected, format!("patch does not apply: {e}")),
        },
    };
    result.duration_ms = started.elapsed().as_millis() as u64;
    push_tool_result(&mut state.steps, &mut state.messages, result, None);
    Ok(())
}

pub fn episode_id(problem_id: &str, config: &AgentConfig, attempt: u32) -> String {
    format!("{problem_id}/{}/{attempt}", config.preset)
}

fn failed_before_start(
    header: TrajectoryHeader,
    diagnostic: String,
    env_error: bool,
    started: Instant,
    commands: Vec<crate::sandbox::Invocation>,
) -> Trajectory {
    Trajectory {
        header,
        steps: Vec::new(),
        verdict: VerdictRecord {
            verdict: Verdict::Error,
            flags: VerdictFlags {
                timeout: false,
                env_error,
            },
            diagnostic: Some(diagnostic),
            usage: UsageTotals::default(),
            delegated_usage: UsageTotals::default(),
            final_build: None,
            commands,
            wall_ms: started.elapsed().as_millis() as u64,
        },
    }
}

/// Runs one sampling attempt of `problem` end to end and returns its record.
///
/// Never panics on model or tool behaviour; failures end up in the verdict.
pub fn run_episode(
    problem: &ProblemInstance,
    config: &AgentConfig,
    env: &EpisodeEnv<'_>,
    driver: &mut dyn ModelDriver,
    attempt: u32,
) -> Trajectory {
    let started = Instant::now();
    let mut header = TrajectoryHeader {
        episode_id: episode_id(&problem.id, config, attempt),
        problem_id: problem.id.clone(),
        attempt,
        config: config.clone(),
        model: driver.model_id().to_string(),
        fixture_hash: env.fixture_hash.clone(),
        workspace: String::new(),
    };
    let agent = match Agent::new(config, env) {
        Ok(a) => a,
        Err(e) => return failed_before_start(header, e.to_string(), false, started, Vec::new()),
    };
    let mut ws = match env.sandbox.prepare(&header.episode_id, &problem.checkout()) {
        Ok(ws) => ws,
        Err(e) => return failed_before_start(header, e.to_string(), true, started, Vec::new()),
    };
    header.workspace = ws.root().display().to_string();
    env.sandbox.reset_build_state(&mut ws);
    let error_log = if problem.error_log.trim().is_empty() {
        env.sandbox.run_build(&mut ws).log
    } else {
        problem.error_log.clone()
    };
    let prompt = {
        let mut p = match build_initial_prompt(ws.root(), &error_log, config.log_budget) {
            Ok(p) => p,
            Err(e) => {
                let commands = ws.invocations().to_vec();
                let _ = ws.destroy();
                return failed_before_start(header, format!("workspace unreadable: {e}"), true, started, commands);
            }
        };
        if config.preset == AgentPreset::CodingAssistant {
            p.push('\n');
            p.push_str(PATCH_INSTRUCTIONS);
        }
        p
    };
    let mut state = EpisodeState::new(ws, prompt);

    let mut flags = VerdictFlags::default();
    let mut diagnostic = None;
    let verdict = if config.preset == AgentPreset::CodingAssistant {
        match run_patch_mode(&mut state, &agent, driver) {
            Ok(()) => {
                let (v, f, d) = verify(&mut state, env.sandbox);
                flags = f;
                diagnostic = d;
                v
            }
            Err(e) => {
                diagnostic = Some(format!("model call failed: {e}"));
                Verdict::Error
            }
        }
    } else {
        loop {
            match check_termination(&state, config) {
                Termination::Continue => {
                    if let Err(e) = agent_step(&mut state, &agent, driver) {
                        diagnostic = Some(format!("model call failed: {e}"));
                        break Verdict::Error;
                    }
                }
                Termination::VerifyAndStop => {
                    let (v, f, d) = verify(&mut state, env.sandbox);
                    flags = f;
                    diagnostic = d;
                    break v;
                }
                Termination::StopBudget => break Verdict::UnresolvedBudget,
            }
        }
    };
    state.terminal = Some(verdict);
    let final_build = if matches!(verdict, Verdict::UnresolvedBudget) {
        None
    } else {
        state.last_build.clone()
    };
    let commands = state.workspace.invocations().to_vec();
    let _ = state.workspace.destroy();
    let usage = usage_of(&state.steps);
    debug_assert_eq!(usage.llm_calls, state.llm_calls_used);
    Trajectory {
        header,
        steps: state.steps,
        verdict: VerdictRecord {
            verdict,
            flags,
            diagnostic,
            usage,
            delegated_usage: state.delegated_usage,
            final_build,
            commands,
            wall_ms: started.elapsed().as_millis() as u64,
        },
    }
}

/// Hierarchical episodes run through [`run_episode`]; this checks the preset.
pub fn run_hierarchical_episode(
    problem: &ProblemInstance,
    config: &AgentConfig,
    env: &EpisodeEnv<'_>,
    driver: &mut dyn ModelDriver,
    attempt: u32,
) -> Result<Trajectory, AgentError> {
    if config.preset != AgentPreset::Hierarchical {
        return Err(AgentError::Config(format!(
            "hierarchical episode requires the hierarchical preset, got {}",
            config.preset
        )));
    }
    Ok(run_episode(problem, config, env, driver, attempt))
}
