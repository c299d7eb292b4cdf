//! Sampling episodes over a dataset and turning them into pass@k, tool-usage
//! and cost reports.

mod passk;
mod render;
mod report;
mod runner;

use thiserror::Error;

pub use passk::{binomial, pass_at_k, pass_at_k_first, score, PassAtKMode};
pub use render::{aggregate_report, ReportFormat};
pub use report::{
    ChangeSummary, ConfigAggregates, ConfigEntry, CostRow, EnvErrorPolicy, EvalReport, GroupRates, InstanceMeta,
    PassAtK, SampleOutcome, ToolUsage, UsageRow, REPORT_SCHEMA,
};
pub use runner::{
    run_benchmark, run_cascade, BenchmarkRun, CascadeOutcome, CascadeTier, DriverFactory, EscalationRule,
    EpisodeSetup, EvalOptions, SharedSetup, DEFAULT_SAMPLES,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Domain(String),
    #[error("invalid report: {0}")]
    Report(String),
    #[error("model driver: {0}")]
    Driver(String),
}
