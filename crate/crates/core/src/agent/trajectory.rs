use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::AgentConfig;
use crate::llm::Usage;
use crate::sandbox::{BuildOutcome, Invocation};
use crate::toolkit::{ToolCall, ToolResult};

pub const WORKSPACE_PLACEHOLDER: &str = "<workspace>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Resolved,
    UnresolvedBudget,
    UnresolvedGaveUp,
    Error,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Resolved => "resolved",
            Verdict::UnresolvedBudget => "unresolved_budget",
            Verdict::UnresolvedGaveUp => "unresolved_gave_up",
            Verdict::Error => "error",
        }
    }

    pub fn is_resolved(self) -> bool {
        self == Verdict::Resolved
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRole {
    User,
    Assistant,
    Tool,
}

/// Token and call totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub llm_calls: u32,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub estimated: bool,
}

impl UsageTotals {
    pub fn add_call(&mut self, usage: Usage) {
        self.input_tokens += usage.input_tokens;
        self.output_tokens += usage.output_tokens;
        self.llm_calls += 1;
        self.estimated |= usage.estimated;
    }

    pub fn add(&mut self, other: UsageTotals) {
        self.input_tokens += other.input_tokens;
        self.output_tokens += other.output_tokens;
        self.llm_calls += other.llm_calls;
        self.estimated |= other.estimated;
    }
}

/// One line of the trajectory: the initial prompt, a model turn, or a tool result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub seq: usize,
    pub role: StepRole,
    pub content: String,
    #[serde(default)]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_result: Option<ToolResult>,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub wall_ms: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub estimated: bool,
    /// The sub-agent episode behind a `delegate_edit` result.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delegated: Option<Box<SubTrajectory>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubOutcome {
    Completed,
    BudgetExhausted,
    Error,
}

/// A delegated editing episode nested in its parent's step record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubTrajectory {
    pub instructions: String,
    pub file_paths: Vec<String>,
    pub max_llm_calls: u32,
    pub steps: Vec<StepRecord>,
    pub usage: UsageTotals,
    pub outcome: SubOutcome,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub episode_id: String,
    pub problem_id: String,
    pub attempt: u32,
    pub config: AgentConfig,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture_hash: Option<String>,
    /// Workspace root the episode ran in.
    pub workspace: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictFlags {
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub timeout: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub env_error: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub verdict: Verdict,
    #[serde(default)]
    pub flags: VerdictFlags,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    /// Totals over this episode's own model turns.
    pub usage: UsageTotals,
    /// Totals over delegated sub-episodes.
    #[serde(default)]
    pub delegated_usage: UsageTotals,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_build: Option<BuildOutcome>,
    /// Every sandbox command of the episode, in order.
    #[serde(default)]
    pub commands: Vec<Invocation>,
    pub wall_ms: u64,
}

/// The complete record of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub header: TrajectoryHeader,
    pub steps: Vec<StepRecord>,
    pub verdict: VerdictRecord,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header(TrajectoryHeader),
    Step(StepRecord),
    Verdict(VerdictRecord),
}

impl Trajectory {
    pub fn verdict(&self) -> Verdict {
        self.verdict.verdict
    }

    pub fn llm_calls(&self) -> u32 {
        self.verdict.usage.llm_calls
    }

    /// Own plus delegated usage: the episode's full cost.
    pub fn total_usage(&self) -> UsageTotals {
        let mut t = self.verdict.usage;
        t.add(self.verdict.delegated_usage);
        t
    }

    /// Recomputes own-turn usage from the step records.
    pub fn usage_from_steps(&self) -> UsageTotals {
        usage_of(&self.steps)
    }

    /// Tool calls issued by this episode's model, by tool name.
    pub fn tool_histogram(&self) -> BTreeMap<String, u64> {
        let mut h = BTreeMap::new();
        for step in self.steps.iter().filter(|s| s.role == StepRole::Assistant) {
            for call in &step.tool_calls {
                *h.entry(call.name.clone()).or_insert(0) += 1;
            }
        }
        h
    }

    /// Tool calls in issuance order.
    pub fn tool_calls(&self) -> impl Iterator<Item = &ToolCall> {
        self.steps
            .iter()
            .filter(|s| s.role == StepRole::Assistant)
            .flat_map(|s| s.tool_calls.iter())
    }

    pub fn sub_trajectories(&self) -> impl Iterator<Item = &SubTrajectory> {
        self.steps.iter().filter_map(|s| s.delegated.as_deref())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: Line| {
            out.push_str(&serde_json::to_string(&line).expect("trajectory serializes"));
            out.push('\n');
        };
        push(Line::Header(self.header.clone()));
        for s in &self.steps {
            push(Line::Step(s.clone()));
        }
        push(Line::Verdict(self.verdict.clone()));
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut verdict = None;
        for (i, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line: Line = serde_json::from_str(raw).map_err(|e| format!("line {}: {e}", i + 1))?;
            match line {
                Line::Header(h) if header.is_none() && steps.is_empty() => header = Some(h),
                Line::Step(s) if header.is_some() && verdict.is_none() => steps.push(s),
                Line::Verdict(v) if header.is_some() && verdict.is_none() => verdict = Some(v),
                _ => return Err(format!("line {}: record out of order", i + 1)),
            }
        }
        Ok(Trajectory {
            header: header.ok_or("missing header record")?,
            steps,
            verdict: verdict.ok_or("missing verdict record")?,
        })
    }

    /// A copy with timings zeroed, for golden comparisons.
    pub fn normalized(&self) -> Trajectory {
        let mut t = self.clone();
        zero_steps(&mut t.steps);
        t.verdict.wall_ms = 0;
        if let Some(b) = &mut t.verdict.final_build {
            b.duration_s = 0.0;
        }
        t
    }

    /// JSONL with timings zeroed and the workspace path replaced by
    /// [`WORKSPACE_PLACEHOLDER`].
    pub fn to_normalized_jsonl(&self) -> String {
        let text = self.normalized().to_jsonl();
        let ws = &self.header.workspace;
        if ws.is_empty() {
            return text;
        }
        // Paths appear JSON-escaped inside string values.
        let escaped = serde_json::to_string(ws).expect("string serializes");
        text.replace(&escaped[1..escaped.len() - 1], WORKSPACE_PLACEHOLDER)
    }
}

fn zero_steps(steps: &mut [StepRecord]) {
    for s in steps {
        s.wall_ms = 0;
        if let Some(r) = &mut s.tool_result {
            r.duration_ms = 0;
        }
        if let Some(sub) = &mut s.delegated {
            zero_steps(&mut sub.steps);
        }
    }
}

pub(crate) fn usage_of(steps: &[StepRecord]) -> UsageTotals {
    let mut t = UsageTotals::default();
    for s in steps.iter().filter(|s| s.role == StepRole::Assistant) {
        t.add_call(Usage {
            input_tokens: s.tokens_in,
            output_tokens: s.tokens_out,
            estimated: s.estimated,
        });
    }
    t
}

/// Line-based diff of two normalized trajectories; empty when equal.
pub fn diff_jsonl(expected: &str, actual: &str) -> Vec<String> {
    let e: Vec<&str> = expected.lines().collect();
    let a: Vec<&str> = actual.lines().collect();
    let mut out = Vec::new();
    for i in 0..e.len().max(a.len()) {
        match (e.get(i), a.get(i)) {
            (Some(x), Some(y)) if x == y => {}
            (x, y) => {
                out.push(format!("line {}:", i + 1));
                if let Some(x) = x {
                    out.push(format!("- {x}"));
                }
                if let Some(y) = y {
                    out.push(format!("+ {y}"));
                }
            }
        }
    }
    out
}
