use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::passk::PassAtKMode;
use super::report::{ConfigEntry, EnvErrorPolicy, EvalReport, InstanceMeta, SampleOutcome};
use super::EvalError;
use crate::agent::{run_episode, AgentConfig, EpisodeEnv, Trajectory, UsageTotals, Verdict};
use crate::benchmark::ProblemInstance;
use crate::llm::{ModelDriver, RetryPolicy};
use crate::sandbox::Sandbox;
use crate::toolkit::{SearchBackend, ToolLimits};

/// Samples per instance when none is given.
pub const DEFAULT_SAMPLES: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub n_samples: u32,
    pub ks: Vec<u32>,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    pub policy: EnvErrorPolicy,
    pub mode: PassAtKMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            n_samples: DEFAULT_SAMPLES,
            ks: vec![1, 2, 4],
            jobs: 0,
            policy: EnvErrorPolicy::default(),
            mode: PassAtKMode::default(),
        }
    }
}

/// Supplies a fresh model driver for every attempt.
pub trait DriverFactory: Sync {
    fn driver(&self, problem: &ProblemInstance, config: &ConfigEntry, attempt: u32)
        -> Result<Box<dyn ModelDriver>, EvalError>;
}

impl<F> DriverFactory for F
where
    F: Fn(&ProblemInstance, &ConfigEntry, u32) -> Result<Box<dyn ModelDriver>, EvalError> + Sync,
{
    fn driver(
        &self,
        problem: &ProblemInstance,
        config: &ConfigEntry,
        attempt: u32,
    ) -> Result<Box<dyn ModelDriver>, EvalError> {
        self(problem, config, attempt)
    }
}

/// Supplies the sandbox and services each instance's episodes run against.
pub trait EpisodeSetup: Sync {
    fn sandbox(&self, problem: &ProblemInstance, config: &ConfigEntry) -> Result<Sandbox, EvalError>;
    fn search(&self, problem: &ProblemInstance, config: &ConfigEntry) -> &dyn SearchBackend;
    fn limits(&self) -> ToolLimits {
        ToolLimits::default()
    }
    fn retry(&self) -> RetryPolicy {
        RetryPolicy::default()
    }
    fn fixture_hash(&self, _problem: &ProblemInstance, _config: &ConfigEntry) -> Option<String> {
        None
    }
    /// Whether the pair is run at all; sparse suites leave some out.
    fn covers(&self, _problem: &ProblemInstance, _config: &ConfigEntry) -> bool {
        true
    }
}

/// One sandbox and search backend for every instance.
pub struct SharedSetup<S> {
    pub sandbox: Sandbox,
    pub search: S,
    pub limits: ToolLimits,
    pub retry: RetryPolicy,
}

impl<S: SearchBackend> SharedSetup<S> {
    pub fn new(sandbox: Sandbox, search: S) -> Self {
        SharedSetup {
            sandbox,
            search,
            limits: ToolLimits::default(),
            retry: RetryPolicy::default(),
        }
    }
}

impl<S: SearchBackend> EpisodeSetup for SharedSetup<S> {
    fn sandbox(&self, _: &ProblemInstance, _: &ConfigEntry) -> Result<Sandbox, EvalError> {
        Ok(self.sandbox.clone())
    }

    fn search(&self, _: &ProblemInstance, _: &ConfigEntry) -> &dyn SearchBackend {
        &self.search
    }

    fn limits(&self) -> ToolLimits {
        self.limits
    }

    fn retry(&self) -> RetryPolicy {
        self.retry
    }
}

pub struct BenchmarkRun {
    pub report: EvalReport,
    /// Every attempt's trajectory, in report outcome order.
    pub trajectories: Vec<(String, Trajectory)>,
}

/// Runs `n_samples` episodes for every (instance, config) pair on a bounded
/// worker pool and aggregates them.
pub fn run_benchmark(
    dataset: &[ProblemInstance],
    configs: &[ConfigEntry],
    opts: &EvalOptions,
    setup: &dyn EpisodeSetup,
    drivers: &dyn DriverFactory,
) -> Result<BenchmarkRun, EvalError> {
    if opts.n_samples == 0 {
        return Err(EvalError::Domain("n_samples must be positive".into()));
    }
    if let Some(&k) = opts.ks.iter().find(|&&k| k == 0 || k > opts.n_samples) {
        return Err(EvalError::Domain(format!("k={k} outside 1..={}", opts.n_samples)));
    }
    for (i, c) in configs.iter().enumerate() {
        if configs[..i].iter().any(|d| d.label == c.label) {
            return Err(EvalError::Domain(format!("duplicate config label `{}`", c.label)));
        }
        c.config.validate().map_err(|e| EvalError::Domain(e.to_string()))?;
    }
    let mut grid = Vec::new();
    for c in configs {
        for p in dataset.iter().filter(|p| setup.covers(p, c)) {
            for attempt in 0..opts.n_samples {
                grid.push((c, p, attempt));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| EvalError::Domain(format!("worker pool: {e}")))?;
    let results: Vec<Result<(String, Trajectory), EvalError>> = pool.install(|| {
        grid.par_iter()
            .map(|(c, p, attempt)| {
                let mut driver = drivers.driver(p, c, *attempt)?;
                let sandbox = setup.sandbox(p, c)?;
                let env = EpisodeEnv {
                    sandbox: &sandbox,
                    search: setup.search(p, c),
                    limits: setup.limits(),
                    retry: setup.retry(),
                    fixture_hash: setup.fixture_hash(p, c),
                };
                let t = run_episode(p, &c.config, &env, driver.as_mut(), *attempt);
                tracing::debug!(episode = %t.header.episode_id, verdict = %t.verdict(), "attempt finished");
                Ok((c.label.clone(), t))
            })
            .collect()
    });
    let mut trajectories = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let outcomes: Vec<SampleOutcome> = trajectories
        .iter()
        .map(|(label, t)| SampleOutcome::from_trajectory(t, label))
        .collect();
    let report = EvalReport::new(
        opts.n_samples,
        opts.ks.clone(),
        opts.policy,
        opts.mode,
        configs.to_vec(),
        dataset.iter().map(InstanceMeta::of).collect(),
        outcomes,
    )?;
    let order = |label: &str| configs.iter().position(|c| c.label == label);
    trajectories.sort_by(|(la, a), (lb, b)| {
        (order(la), &a.header.problem_id, a.header.attempt).cmp(&(order(lb), &b.header.problem_id, b.header.attempt))
    });
    Ok(BenchmarkRun { report, trajectories })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CascadeTier {
    Small,
    Large,
}

/// When the small model's attempt is handed to the large model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscalationRule {
    /// Any verdict other than resolved.
    #[default]
    NotResolved,
    /// Not resolved, except environment errors (the large model would hit them too).
    NotResolvedExceptEnvError,
}

impl EscalationRule {
    pub fn escalates(self, t: &Trajectory) -> bool {
        match self {
            EscalationRule::NotResolved => t.verdict() != Verdict::Resolved,
            EscalationRule::NotResolvedExceptEnvError => {
                t.verdict() != Verdict::Resolved && !t.verdict.flags.env_error
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CascadeOutcome {
    pub verdict: Verdict,
    /// Tier whose attempt produced the final verdict.
    pub final_tier: CascadeTier,
    pub resolved_by: Option<CascadeTier>,
    /// Usage of every attempt made, summed.
    pub cost: UsageTotals,
    pub attempts: Vec<(CascadeTier, Trajectory)>,
}

/// Small model first; the large model only when `rule` says so.
#[allow(clippy::too_many_arguments)]
pub fn run_cascade(
    problem: &ProblemInstance,
    small: (&AgentConfig, &mut dyn ModelDriver),
    large: (&AgentConfig, &mut dyn ModelDriver),
    rule: EscalationRule,
    env: &EpisodeEnv<'_>,
    attempt: u32,
) -> CascadeOutcome {
    let first = run_episode(problem, small.0, env, small.1, attempt);
    let mut cost = first.total_usage();
    let mut attempts = vec![(CascadeTier::Small, first)];
    if rule.escalates(&attempts[0].1) {
        let second = run_episode(problem, large.0, env, large.1, attempt);
        cost.add(second.total_usage());
        attempts.push((CascadeTier::Large, second));
    }
    let (final_tier, last) = attempts.last().expect("at least one attempt");
    let verdict = last.verdict();
    CascadeOutcome {
        verdict,
        final_tier: *final_tier,
        resolved_by: verdict.is_resolved().then_some(*final_tier),
        cost,
        attempts,
    }
}
