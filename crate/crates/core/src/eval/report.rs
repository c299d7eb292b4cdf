use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::passk::{score, PassAtKMode};
use super::EvalError;
use crate::agent::{AgentConfig, Trajectory, UsageTotals, Verdict, VerdictFlags};
use crate::benchmark::{ChangeStats, CurationMethod, DifficultyTier, ProblemInstance};
use crate::toolkit::{classify_shell_command, ShellIntent, ToolId};
use crate::triage::{MetricSummary, RootCause};

pub const REPORT_SCHEMA: &str = "buildbench.report/1";

/// What to do with attempts that failed for environment reasons.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvErrorPolicy {
    /// Count them as failed attempts (and report how many there were).
    #[default]
    CountAsFailure,
    /// Drop them from every denominator.
    ExcludeEnvErrors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEntry {
    pub label: String,
    pub config: AgentConfig,
}

/// The instance facts aggregates are grouped by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub id: String,
    pub method: CurationMethod,
    pub category: RootCause,
    pub change_stats: ChangeStats,
}

impl InstanceMeta {
    pub fn of(p: &ProblemInstance) -> Self {
        InstanceMeta {
            id: p.id.clone(),
            method: p.method,
            category: p.category.unwrap_or(RootCause::Unclassified),
            change_stats: p.change_stats,
        }
    }
}

/// One sampled attempt, reduced to what the report needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub instance_id: String,
    pub config: String,
    pub attempt: u32,
    pub verdict: Verdict,
    #[serde(default)]
    pub flags: VerdictFlags,
    /// Own model turns.
    pub usage: UsageTotals,
    /// Delegated sub-agent turns.
    #[serde(default)]
    pub delegated_usage: UsageTotals,
    pub wall_ms: u64,
    /// Tool calls by tool name.
    pub tool_histogram: BTreeMap<String, u64>,
    /// `run_shell` calls by the domain operation they perform.
    #[serde(default)]
    pub shell_intents: BTreeMap<String, u64>,
    pub workspace: String,
}

impl SampleOutcome {
    pub fn from_trajectory(t: &Trajectory, config_label: &str) -> Self {
        let mut shell_intents = BTreeMap::new();
        for call in t.tool_calls().filter(|c| c.name == ToolId::RunShell.as_str()) {
            if let Some(intent) = call.str_arg("shell_command").and_then(classify_shell_command) {
                *shell_intents.entry(intent_key(intent).to_string()).or_insert(0) += 1;
            }
        }
        SampleOutcome {
            instance_id: t.header.problem_id.clone(),
            config: config_label.to_string(),
            attempt: t.header.attempt,
            verdict: t.verdict(),
            flags: t.verdict.flags,
            usage: t.verdict.usage,
            delegated_usage: t.verdict.delegated_usage,
            wall_ms: t.verdict.wall_ms,
            tool_histogram: t.tool_histogram(),
            shell_intents,
            workspace: t.header.workspace.clone(),
        }
    }

    pub fn resolved(&self) -> bool {
        self.verdict.is_resolved()
    }

    pub fn is_env_error(&self) -> bool {
        self.verdict == Verdict::Error && self.flags.env_error
    }

    /// Own plus delegated usage.
    pub fn cost(&self) -> UsageTotals {
        let mut u = self.usage;
        u.add(self.delegated_usage);
        u
    }
}

fn intent_key(i: ShellIntent) -> &'static str {
    match i {
        ShellIntent::Build => ToolId::GradleBuild.as_str(),
        ShellIntent::GradleTask => ToolId::GradleTask.as_str(),
        ShellIntent::JavaSwitch => ToolId::SetJavaVersion.as_str(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassAtK {
    pub k: u32,
    /// Mean over instances with at least `k` counted attempts; `None` if none.
    pub rate: Option<f64>,
    pub instances: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub group: String,
    pub instances: u64,
    pub attempts: u64,
    pub resolved: u64,
    /// Resolved attempts over counted attempts.
    pub attempt_rate: Option<f64>,
    pub pass_at_k: Vec<PassAtK>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeSummary {
    pub attempts: u64,
    pub lines_changed: MetricSummary,
    pub files_changed: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    /// `resolved` or `unresolved`.
    pub outcome: String,
    pub attempts: u64,
    pub mean_input_tokens: f64,
    pub mean_output_tokens: f64,
    pub mean_llm_calls: f64,
    pub mean_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageRow {
    pub tool: String,
    pub label: String,
    pub calls: u64,
    /// Share of all tool calls of the configuration, in percent.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolUsage {
    pub total_calls: u64,
    pub tools: Vec<UsageRow>,
    /// Shell calls by the domain tool they stand in for, over the same total.
    pub via_shell: Vec<UsageRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigAggregates {
    pub config: String,
    pub attempts: u64,
    pub resolved: u64,
    pub env_errors: u64,
    pub overall: GroupRates,
    pub by_method: Vec<GroupRates>,
    pub by_category: Vec<GroupRates>,
    pub by_tier: Vec<GroupRates>,
    pub fixed_changes: Option<ChangeSummary>,
    pub failed_changes: Option<ChangeSummary>,
    pub cost: Vec<CostRow>,
    pub total_usage: UsageTotals,
    pub tool_usage: ToolUsage,
}

/// Raw outcomes plus everything derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub n_samples: u32,
    pub ks: Vec<u32>,
    #[serde(default)]
    pub policy: EnvErrorPolicy,
    #[serde(default)]
    pub mode: PassAtKMode,
    pub configs: Vec<ConfigEntry>,
    pub instances: Vec<InstanceMeta>,
    pub outcomes: Vec<SampleOutcome>,
    pub aggregates: Vec<ConfigAggregates>,
}

impl EvalReport {
    /// Builds a report from raw outcomes, sorting them and computing aggregates.
    pub fn new(
        n_samples: u32,
        ks: Vec<u32>,
        policy: EnvErrorPolicy,
        mode: PassAtKMode,
        configs: Vec<ConfigEntry>,
        instances: Vec<InstanceMeta>,
        mut outcomes: Vec<SampleOutcome>,
    ) -> Result<Self, EvalError> {
        let order: BTreeMap<&str, usize> = configs.iter().enumerate().map(|(i, c)| (c.label.as_str(), i)).collect();
        outcomes.sort_by(|a, b| {
            (order.get(a.config.as_str()), &a.instance_id, a.attempt).cmp(&(
                order.get(b.config.as_str()),
                &b.instance_id,
                b.attempt,
            ))
        });
        let mut report = EvalReport {
            schema: REPORT_SCHEMA.to_string(),
            n_samples,
            ks,
            policy,
            mode,
            configs,
            instances,
            outcomes,
            aggregates: Vec::new(),
        };
        report.check()?;
        report.aggregates = report.recompute_aggregates();
        Ok(report)
    }

    /// Structural checks: known schema, configs and instances, unique attempt indices.
    pub fn check(&self) -> Result<(), EvalError> {
        if self.schema != REPORT_SCHEMA {
            return Err(EvalError::Report(format!("unsupported report schema `{}`", self.schema)));
        }
        if let Some(&k) = self.ks.iter().find(|&&k| k == 0 || k > self.n_samples) {
            return Err(EvalError::Domain(format!("k={k} outside 1..={}", self.n_samples)));
        }
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.outcomes {
            if !self.configs.iter().any(|c| c.label == o.config) {
                return Err(EvalError::Report(format!("outcome for unknown config `{}`", o.config)));
            }
            if !self.instances.iter().any(|i| i.id == o.instance_id) {
                return Err(EvalError::Report(format!("outcome for unknown instance `{}`", o.instance_id)));
            }
            if o.attempt >= self.n_samples {
                return Err(EvalError::Report(format!(
                    "attempt {} of {} out of range",
                    o.attempt, o.instance_id
                )));
            }
            if !seen.insert((&o.config, &o.instance_id, o.attempt)) {
                return Err(EvalError::Report(format!(
                    "duplicate attempt {} for {} under {}",
                    o.attempt, o.instance_id, o.config
                )));
            }
        }
        Ok(())
    }

    /// Aggregates derived from the raw outcomes alone.
    pub fn recompute_aggregates(&self) -> Vec<ConfigAggregates> {
        self.configs
            .iter()
            .map(|c| {
                let outcomes: Vec<&SampleOutcome> = self.outcomes.iter().filter(|o| o.config == c.label).collect();
                aggregate_config(&c.label, &outcomes, &self.instances, &self.ks, self.policy, self.mode)
            })
            .collect()
    }

    /// True when the stored aggregates equal a fresh recomputation bit for bit.
    pub fn is_self_consistent(&self) -> bool {
        let fresh = self.recompute_aggregates();
        serde_json::to_string(&fresh).ok() == serde_json::to_string(&self.aggregates).ok()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let report: EvalReport = serde_json::from_str(text).map_err(|e| EvalError::Report(e.to_string()))?;
        report.check()?;
        Ok(report)
    }

    pub fn aggregates_for(&self, label: &str) -> Option<&ConfigAggregates> {
        self.aggregates.iter().find(|a| a.config == label)
    }
}

fn counted<'a>(outcomes: &[&'a SampleOutcome], policy: EnvErrorPolicy) -> Vec<&'a SampleOutcome> {
    outcomes
        .iter()
        .copied()
        .filter(|o| policy == EnvErrorPolicy::CountAsFailure || !o.is_env_error())
        .collect()
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn group_rates(
    group: String,
    instance_ids: &[&str],
    outcomes: &[&SampleOutcome],
    ks: &[u32],
    mode: PassAtKMode,
) -> GroupRates {
    let mut per_instance: BTreeMap<&str, Vec<bool>> = instance_ids.iter().map(|id| (*id, Vec::new())).collect();
    for o in outcomes {
        if let Some(v) = per_instance.get_mut(o.instance_id.as_str()) {
            v.push(o.resolved());
        }
    }
    let attempts: u64 = per_instance.values().map(|v| v.len() as u64).sum();
    let resolved: u64 = per_instance.values().map(|v| v.iter().filter(|&&s| s).count() as u64).sum();
    let pass_at_k = ks
        .iter()
        .map(|&k| {
            let scores: Vec<f64> = per_instance
                .values()
                .filter(|v| v.len() >= k as usize && k > 0)
                .map(|v| score(v, k as usize, mode).expect("k checked against n"))
                .collect();
            PassAtK {
                k,
                rate: (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64),
                instances: scores.len() as u64,
            }
        })
        .collect();
    GroupRates {
        group,
        instances: instance_ids.len() as u64,
        attempts,
        resolved,
        attempt_rate: ratio(resolved, attempts),
        pass_at_k,
    }
}

fn change_summary(outcomes: &[&SampleOutcome], meta: &BTreeMap<&str, &InstanceMeta>) -> Option<ChangeSummary> {
    let stats: Vec<ChangeStats> = outcomes
        .iter()
        .filter_map(|o| meta.get(o.instance_id.as_str()).map(|m| m.change_stats))
        .collect();
    let lines: Vec<f64> = stats.iter().map(|s| s.lines_changed as f64).collect();
    let files: Vec<f64> = stats.iter().map(|s| s.files_changed as f64).collect();
    Some(ChangeSummary {
        attempts: stats.len() as u64,
        lines_changed: MetricSummary::of(&lines)?,
        files_changed: MetricSummary::of(&files)?,
    })
}

fn cost_row(name: &str, outcomes: &[&SampleOutcome]) -> CostRow {
    let n = outcomes.len() as u64;
    let sum = |f: &dyn Fn(&SampleOutcome) -> u64| -> f64 {
        ratio(outcomes.iter().map(|o| f(o)).sum(), n).unwrap_or(0.0)
    };
    CostRow {
        outcome: name.to_string(),
        attempts: n,
        mean_input_tokens: sum(&|o| o.cost().input_tokens),
        mean_output_tokens: sum(&|o| o.cost().output_tokens),
        mean_llm_calls: sum(&|o| o.cost().llm_calls as u64),
        mean_wall_ms: sum(&|o| o.wall_ms),
    }
}

fn tool_label(name: &str) -> String {
    name.parse::<ToolId>()
        .map(|t| t.label().to_string())
        .unwrap_or_else(|_| name.to_string())
}

fn tool_usage(outcomes: &[&SampleOutcome]) -> ToolUsage {
    let mut tools: BTreeMap<&str, u64> = BTreeMap::new();
    let mut via_shell: BTreeMap<&str, u64> = BTreeMap::new();
    for o in outcomes {
        for (name, n) in &o.tool_histogram {
            *tools.entry(name).or_insert(0) += n;
        }
        for (name, n) in &o.shell_intents {
            *via_shell.entry(name).or_insert(0) += n;
        }
    }
    let total: u64 = tools.values().sum();
    let rows = |m: BTreeMap<&str, u64>| -> Vec<UsageRow> {
        let mut rows: Vec<UsageRow> = m
            .into_iter()
            .map(|(tool, calls)| UsageRow {
                tool: tool.to_string(),
                label: tool_label(tool),
                calls,
                percent: ratio(calls * 100, total).unwrap_or(0.0),
            })
            .collect();
        rows.sort_by_key(|r| (tool_rank(&r.tool), r.tool.clone()));
        rows
    };
    ToolUsage {
        total_calls: total,
        tools: rows(tools),
        via_shell: rows(via_shell),
    }
}

fn tool_rank(name: &str) -> usize {
    name.parse::<ToolId>()
        .map(|t| ToolId::ALL.iter().position(|x| *x == t).unwrap_or(usize::MAX))
        .unwrap_or(usize::MAX)
}

fn aggregate_config(
    label: &str,
    outcomes: &[&SampleOutcome],
    instances: &[InstanceMeta],
    ks: &[u32],
    policy: EnvErrorPolicy,
    mode: PassAtKMode,
) -> ConfigAggregates {
    let meta: BTreeMap<&str, &InstanceMeta> = instances.iter().map(|m| (m.id.as_str(), m)).collect();
    let env_errors = outcomes.iter().filter(|o| o.is_env_error()).count() as u64;
    let kept = counted(outcomes, policy);
    let ids_where = |pred: &dyn Fn(&InstanceMeta) -> bool| -> Vec<&str> {
        instances.iter().filter(|m| pred(m)).map(|m| m.id.as_str()).collect()
    };
    let all_ids = ids_where(&|_| true);
    let overall = group_rates("overall".into(), &all_ids, &kept, ks, mode);
    let by_method = CurationMethod::ALL
        .into_iter()
        .filter_map(|m| {
            let ids = ids_where(&|i| i.method == m);
            (!ids.is_empty()).then(|| group_rates(m.as_str().into(), &ids, &kept, ks, mode))
        })
        .collect();
    let by_category = RootCause::ALL
        .into_iter()
        .filter_map(|c| {
            let ids = ids_where(&|i| i.category == c);
            (!ids.is_empty()).then(|| group_rates(c.as_str().into(), &ids, &kept, ks, mode))
        })
        .collect();
    let by_tier = DifficultyTier::ALL
        .into_iter()
        .filter_map(|t| {
            let ids = ids_where(&|i| i.change_stats.tier() == t);
            (!ids.is_empty()).then(|| group_rates(t.as_str().into(), &ids, &kept, ks, mode))
        })
        .collect();
    let fixed: Vec<&SampleOutcome> = kept.iter().copied().filter(|o| o.resolved()).collect();
    let failed: Vec<&SampleOutcome> = kept.iter().copied().filter(|o| !o.resolved()).collect();
    let mut total_usage = UsageTotals::default();
    for o in outcomes {
        total_usage.add(o.cost());
    }
    ConfigAggregates {
        config: label.to_string(),
        attempts: kept.len() as u64,
        resolved: fixed.len() as u64,
        env_errors,
        overall,
        by_method,
        by_category,
        by_tier,
        fixed_changes: change_summary(&fixed, &meta),
        failed_changes: change_summary(&failed, &meta),
        cost: vec![cost_row("resolved", &fixed), cost_row("unresolved", &failed)],
        total_usage,
        tool_usage: tool_usage(&kept),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AgentPreset;

    fn outcome(id: &str, attempt: u32, verdict: Verdict, tools: &[(&str, u64)], tokens: u64) -> SampleOutcome {
        SampleOutcome {
            instance_id: id.into(),
            config: "gf".into(),
            attempt,
            verdict,
            flags: VerdictFlags::default(),
            usage: UsageTotals {
                input_tokens: tokens,
                output_tokens: tokens / 10,
                llm_calls: 2,
                estimated: false,
            },
            delegated_usage: UsageTotals::default(),
            wall_ms: 5,
            tool_histogram: tools.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            shell_intents: BTreeMap::new(),
            workspace: format!("/ws/{id}/{attempt}"),
        }
    }

    fn meta(id: &str, lines: u64, category: RootCause) -> InstanceMeta {
        InstanceMeta {
            id: id.into(),
            method: CurationMethod::HumanCommitted,
            category,
            change_stats: ChangeStats {
                files_changed: 1,
                lines_changed: lines,
                binary_files: 0,
            },
        }
    }

    fn report(outcomes: Vec<SampleOutcome>) -> EvalReport {
        EvalReport::new(
            2,
            vec![1, 2],
            EnvErrorPolicy::CountAsFailure,
            PassAtKMode::Unbiased,
            vec![ConfigEntry {
                label: "gf".into(),
                config: AgentConfig::preset(AgentPreset::Gradlefixer, "m"),
            }],
            vec![meta("a", 5, RootCause::SyntaxCode), meta("b", 500, RootCause::ConfigurationError)],
            outcomes,
        )
        .unwrap()
    }

    #[test]
    fn rates_usage_and_self_consistency() {
        let r = report(vec![
            outcome("b", 1, Verdict::UnresolvedBudget, &[("read_file", 3)], 400),
            outcome("a", 0, Verdict::Resolved, &[("read_file", 1), ("replace", 1)], 100),
            outcome("a", 1, Verdict::UnresolvedGaveUp, &[("gradle_build", 2)], 200),
            outcome("b", 0, Verdict::UnresolvedGaveUp, &[("read_file", 3)], 300),
        ]);
        assert_eq!(r.outcomes[0].instance_id, "a");
        let a = &r.aggregates[0];
        assert_eq!(a.overall.pass_at_k[0].rate, Some(0.25));
        assert_eq!(a.overall.pass_at_k[1].rate, Some(0.5));
        let usage = &a.tool_usage;
        assert_eq!(usage.total_calls, 10);
        let read = usage.tools.iter().find(|r| r.tool == "read_file").unwrap();
        assert_eq!((read.calls, read.percent), (7, 70.0));
        assert_eq!(a.cost[0].mean_input_tokens, 100.0);
        assert_eq!(a.cost[1].mean_input_tokens, 300.0);
        assert_eq!(a.fixed_changes.as_ref().unwrap().lines_changed.median, 5.0);
        assert_eq!(a.failed_changes.as_ref().unwrap().lines_changed.median, 500.0);
        let back = EvalReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(back.is_self_consistent());
    }

    #[test]
    fn env_errors_follow_policy() {
        let mut bad = outcome("a", 1, Verdict::Error, &[], 0);
        bad.flags.env_error = true;
        let outs = vec![outcome("a", 0, Verdict::Resolved, &[], 1), bad];
        let counted = report(outs.clone());
        assert_eq!(counted.aggregates[0].overall.attempt_rate, Some(0.5));
        assert_eq!(counted.aggregates[0].env_errors, 1);
        let mut excluded = counted.clone();
        excluded.policy = EnvErrorPolicy::ExcludeEnvErrors;
        let agg = &excluded.recompute_aggregates()[0];
        assert_eq!(agg.overall.attempt_rate, Some(1.0));
        // instance a now has one counted attempt, so pass@2 has no instance
        assert_eq!(agg.overall.pass_at_k[1].rate, None);
    }

    #[test]
    fn duplicate_attempts_rejected() {
        let err = EvalReport::new(
            2,
            vec![1],
            EnvErrorPolicy::default(),
            PassAtKMode::default(),
            vec![ConfigEntry {
                label: "gf".into(),
                config: AgentConfig::preset(AgentPreset::Gradlefixer, "m"),
            }],
            vec![meta("a", 1, RootCause::SyntaxCode)],
            vec![outcome("a", 0, Verdict::Resolved, &[], 1), outcome("a", 0, Verdict::Resolved, &[], 1)],
        );
        assert!(err.is_err());
    }

    #[test]
    fn empty_report_renders_headers() {
        let r = report(Vec::new());
        let text = super::super::aggregate_report(&r, super::super::ReportFormat::Text);
        assert!(text.contains("== pass@k (%) =="));
        assert!(text.contains("== tool usage"));
        let json = super::super::aggregate_report(&r, super::super::ReportFormat::Json);
        assert!(serde_json::from_str::<serde_json::Value>(&json).is_ok());
    }
}
