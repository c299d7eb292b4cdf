use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::{ConfigAggregates, EvalReport, GroupRates};
use crate::toolkit::ToolId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Text,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown report format `{s}` (text|json)")),
        }
    }
}

/// Renders pass@k, tool-usage and cost tables for every configuration.
pub fn aggregate_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Json => serde_json::to_string_pretty(&render_json(report)).expect("tables serialize"),
    }
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.1}", x * 100.0)).unwrap_or_else(|| "-".into())
}

fn rates_line(out: &mut String, g: &GroupRates) {
    let _ = write!(out, "  {:<26} {:>5} {:>7}", g.group, g.instances, g.attempts);
    for p in &g.pass_at_k {
        let _ = write!(out, " {:>7}", pct(p.rate));
    }
    let _ = writeln!(out, " {:>8}", pct(g.attempt_rate));
}

fn rates_header(out: &mut String, title: &str, ks: &[u32]) {
    let _ = write!(out, "  {:<26} {:>5} {:>7}", title, "inst", "tries");
    for k in ks {
        let _ = write!(out, " {:>7}", format!("P@{k}"));
    }
    let _ = writeln!(out, " {:>8}", "rate");
}

fn render_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "samples per instance: {}   k: {}   policy: {:?}   mode: {:?}",
        report.n_samples,
        report.ks.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
        report.policy,
        report.mode
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "== pass@k (%) ==");
    rates_header(&mut out, "config", &report.ks);
    for a in &report.aggregates {
        let mut row = a.overall.clone();
        row.group = a.config.clone();
        rates_line(&mut out, &row);
    }
    for a in &report.aggregates {
        let _ = writeln!(out);
        let _ = writeln!(out, "== {} by group (%) ==", a.config);
        rates_header(&mut out, "group", &report.ks);
        for g in a.by_method.iter().chain(&a.by_category).chain(&a.by_tier) {
            rates_line(&mut out, g);
        }
        if a.env_errors > 0 {
            let _ = writeln!(out, "  environment errors: {} ({:?})", a.env_errors, report.policy);
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "== tool usage (% of all calls) ==");
    let _ = write!(out, "  {:<18}", "tool");
    for a in &report.aggregates {
        let _ = write!(out, " {:>14}", a.config);
    }
    let _ = writeln!(out);
    for id in ToolId::ALL {
        if !report.aggregates.iter().any(|a| a.tool_usage.tools.iter().any(|r| r.tool == id.as_str())) {
            continue;
        }
        usage_line(&mut out, id.label(), &report.aggregates, |a| {
            a.tool_usage.tools.iter().find(|r| r.tool == id.as_str()).map(|r| r.percent)
        });
    }
    for id in [ToolId::SetJavaVersion, ToolId::GradleTask, ToolId::GradleBuild] {
        if !report.aggregates.iter().any(|a| a.tool_usage.via_shell.iter().any(|r| r.tool == id.as_str())) {
            continue;
        }
        usage_line(&mut out, &format!("  {} via shell", id.label()), &report.aggregates, |a| {
            a.tool_usage.via_shell.iter().find(|r| r.tool == id.as_str()).map(|r| r.percent)
        });
    }
    let _ = write!(out, "  {:<18}", "calls");
    for a in &report.aggregates {
        let _ = write!(out, " {:>14}", a.tool_usage.total_calls);
    }
    let _ = writeln!(out);
    let _ = writeln!(out);
    let _ = writeln!(out, "== cost per attempt (means) ==");
    let _ = writeln!(
        out,
        "  {:<14} {:<10} {:>6} {:>14} {:>14} {:>9} {:>12}",
        "config", "outcome", "tries", "input_tok", "output_tok", "calls", "wall_ms"
    );
    for a in &report.aggregates {
        for c in &a.cost {
            let _ = writeln!(
                out,
                "  {:<14} {:<10} {:>6} {:>14.1} {:>14.1} {:>9.2} {:>12.1}",
                a.config, c.outcome, c.attempts, c.mean_input_tokens, c.mean_output_tokens, c.mean_llm_calls, c.mean_wall_ms
            );
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "== change size, median +- std ==");
    let _ = writeln!(out, "  {:<14} {:<8} {:>6} {:>20} {:>16}", "config", "cases", "tries", "lines", "files");
    for a in &report.aggregates {
        for (name, s) in [("fixed", &a.fixed_changes), ("failed", &a.failed_changes)] {
            match s {
                Some(s) => {
                    let _ = writeln!(
                        out,
                        "  {:<14} {:<8} {:>6} {:>20} {:>16}",
                        a.config,
                        name,
                        s.attempts,
                        format!("{:.1} +- {:.1}", s.lines_changed.median, s.lines_changed.std),
                        format!("{:.1} +- {:.1}", s.files_changed.median, s.files_changed.std)
                    );
                }
                None => {
                    let _ = writeln!(out, "  {:<14} {:<8} {:>6} {:>20} {:>16}", a.config, name, 0, "-", "-");
                }
            }
        }
    }
    out
}

fn usage_line(out: &mut String, label: &str, aggs: &[ConfigAggregates], f: impl Fn(&ConfigAggregates) -> Option<f64>) {
    let _ = write!(out, "  {:<18}", label);
    for a in aggs {
        let cell = f(a).map(|p| format!("{p:.1}")).unwrap_or_else(|| "-".into());
        let _ = write!(out, " {:>14}", cell);
    }
    let _ = writeln!(out);
}

fn render_json(report: &EvalReport) -> serde_json::Value {
    let configs: Vec<_> = report
        .aggregates
        .iter()
        .map(|a| {
            json!({
                "config": a.config,
                "pass_at_k": a.overall.pass_at_k,
                "groups": a.by_method.iter().chain(&a.by_category).chain(&a.by_tier).collect::<Vec<_>>(),
                "env_errors": a.env_errors,
                "tool_usage": a.tool_usage,
                "cost": a.cost,
                "fixed_changes": a.fixed_changes,
                "failed_changes": a.failed_changes,
            })
        })
        .collect();
    json!({
        "schema": report.schema,
        "n_samples": report.n_samples,
        "ks": report.ks,
        "policy": report.policy,
        "mode": report.mode,
        "configs": configs,
    })
}
