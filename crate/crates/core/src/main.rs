use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use buildbench::agent::{run_episode, AgentConfig, AgentPreset, EpisodeEnv, Trajectory, Verdict};
use buildbench::benchmark::{
    load_dataset, write_dataset, ChangeStats, CurationLog, CurationMethod, Curator, LocalForge, ProblemInstance,
    RepoRef, SolutionRef, VerifiedBuilds,
};
use buildbench::config::{CliConfig, Overrides};
use buildbench::eval::{
    aggregate_report, run_benchmark, ConfigEntry, EnvErrorPolicy, EvalError, EvalOptions, PassAtKMode, ReportFormat,
    SharedSetup,
};
use buildbench::fixture::{FixtureSuite, ReplayFixture};
use buildbench::llm::{LiveDriver, ModelDriver, RetryPolicy};
use buildbench::sandbox::{ProcessBackend, Sandbox};
use buildbench::toolkit::OfflineSearch;
use buildbench::triage::RuleSet;

const EXIT_OK: u8 = 0;
const EXIT_UNRESOLVED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_ENV: u8 = 3;

#[derive(Parser)]
#[command(name = "buildbench", version, about = "Gradle build-repair agents and their benchmark harness")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "ABB_CONFIG")]
    config: Option<PathBuf>,
    /// Print the effective configuration (API key masked) and exit.
    #[arg(long, global = true)]
    show_config: bool,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Worker threads for eval; 0 means one per core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    max_llm_calls: Option<u32>,
    #[arg(long, global = true)]
    work_root: Option<PathBuf>,
    /// JDK home as VERSION=PATH; repeatable.
    #[arg(long = "jdk", global = true, value_parser = parse_jdk)]
    jdks: Vec<(u32, PathBuf)>,
    #[command(subcommand)]
    command: Option<Command>,
}

fn parse_jdk(s: &str) -> Result<(u32, PathBuf), String> {
    let (v, p) = s.split_once('=').ok_or("expected VERSION=PATH")?;
    Ok((v.trim().parse().map_err(|e| format!("{e}"))?, PathBuf::from(p)))
}

fn parse_preset(s: &str) -> Result<AgentPreset, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown preset `{s}`"))
}

#[derive(Subcommand)]
enum Command {
    /// Run one live repair episode on a local repository.
    Fix(FixArgs),
    /// Run a benchmark over a dataset or a directory of replay fixtures.
    Eval(EvalArgs),
    /// Emit problem instances from a repository's history.
    #[command(subcommand)]
    Curate(CurateCommand),
    /// Failure-log triage.
    #[command(subcommand)]
    Triage(TriageCommand),
    /// Run a replay fixture and diff it against its golden trajectory.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct FixArgs {
    /// Directory holding the failing project.
    repo: PathBuf,
    #[arg(long, default_value = "gradlefixer", value_parser = parse_preset)]
    preset: AgentPreset,
    /// Directory the trajectory is written to.
    #[arg(long, default_value = "trajectories")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset JSONL, or a directory of replay fixtures.
    dataset: PathBuf,
    /// Agent presets to evaluate; fixture suites default to the presets they contain.
    #[arg(long, value_delimiter = ',', value_parser = parse_preset)]
    preset: Vec<AgentPreset>,
    #[arg(long)]
    samples: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<u32>>,
    /// Report file; the rendered summary always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-attempt trajectories.
    #[arg(long)]
    trajectories: Option<PathBuf>,
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    #[arg(long)]
    exclude_env_errors: bool,
    /// Score pass@k over the first k attempts instead of all k-subsets.
    #[arg(long)]
    first_k: bool,
}

#[derive(Subcommand)]
enum CurateCommand {
    /// Failing intermediate commits of merged pull requests.
    Human {
        repo: String,
        /// Pull-request metadata file.
        #[arg(long)]
        prs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dependency updates reverted on top of their commits.
    Dep {
        repo: String,
        #[arg(long = "commit", required = true)]
        commits: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Model-written re-implementations of successful commits.
    Llm {
        repo: String,
        #[arg(long = "commit", required = true)]
        commits: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TriageCommand {
    /// Print the root-cause category and matched rule for a build log.
    Classify {
        log: PathBuf,
        /// Rule file replacing the built-in rules.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReplayArgs {
    fixture: PathBuf,
    /// Rewrite the golden trajectory instead of diffing.
    #[arg(long)]
    update: bool,
}

enum Failure {
    Usage(String),
    Env(String),
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Failure::Usage(e.to_string())
    }

    fn env(e: impl std::fmt::Display) -> Self {
        Failure::Env(e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("ABB_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Env(m)) => {
            eprintln!("environment error: {m}");
            EXIT_ENV
        }
    };
    ExitCode::from(code)
}

fn dispatch(cli: Cli) -> Outcome {
    let flags = Overrides {
        model: cli.model.clone(),
        endpoint: cli.endpoint.clone(),
        jobs: cli.jobs,
        max_llm_calls: cli.max_llm_calls,
        work_root: cli.work_root.clone(),
        jdks: cli.jdks.clone(),
        ..Overrides::default()
    };
    let mut cfg = CliConfig::resolve(cli.config.as_deref(), &flags).map_err(Failure::usage)?;
    if let Some(Command::Eval(a)) = &cli.command {
        cfg.apply_flags(&Overrides {
            samples: a.samples,
            ks: a.k.clone(),
            ..Overrides::default()
        });
        cfg.validate().map_err(Failure::usage)?;
    }
    if cli.show_config {
        print!("{}", cfg.show());
        return Ok(EXIT_OK);
    }
    match cli.command {
        None => Err(Failure::usage("no subcommand given; see --help")),
        Some(Command::Fix(a)) => fix(&cfg, a),
        Some(Command::Eval(a)) => eval(&cfg, a),
        Some(Command::Curate(c)) => curate(&cfg, c),
        Some(Command::Triage(TriageCommand::Classify { log, rules })) => classify(&log, rules.as_deref()),
        Some(Command::Replay(a)) => replay(a),
    }
}

fn agent_config(cfg: &CliConfig, preset: AgentPreset) -> AgentConfig {
    let mut c = AgentConfig::preset(preset, cfg.model.model.clone());
    if cfg.agent.max_llm_calls.is_some() && preset != AgentPreset::CodingAssistant {
        c.max_llm_calls = cfg.agent.max_llm_calls;
    }
    c.temperature = cfg.agent.temperature;
    c.sub_agent_max_calls = cfg.agent.sub_agent_max_calls;
    c
}

fn live_driver(cfg: &CliConfig) -> Result<LiveDriver, Failure> {
    cfg.live_config()
        .map(LiveDriver::new)
        .ok_or_else(|| Failure::env("no model endpoint configured (set ABB_MODEL_ENDPOINT or [model].endpoint)"))
}

fn process_sandbox(cfg: &CliConfig) -> Sandbox {
    Sandbox::new(Arc::new(ProcessBackend), cfg.sandbox_config())
}

fn write_trajectory(dir: &Path, t: &Trajectory) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(Failure::env)?;
    let name = t.header.episode_id.replace(['/', '\\', ':'], "_");
    let path = dir.join(format!("{name}.jsonl"));
    fs::write(&path, t.to_jsonl()).map_err(Failure::env)?;
    Ok(path)
}

fn verdict_code(t: &Trajectory) -> u8 {
    match t.verdict() {
        Verdict::Resolved => EXIT_OK,
        Verdict::Error => EXIT_ENV,
        _ if t.verdict.flags.env_error => EXIT_ENV,
        _ => EXIT_UNRESOLVED,
    }
}

fn fix(cfg: &CliConfig, a: FixArgs) -> Outcome {
    let repo = a.repo.canonicalize().map_err(|e| Failure::usage(format!("{}: {e}", a.repo.display())))?;
    if !repo.is_dir() {
        return Err(Failure::usage(format!("{} is not a directory", repo.display())));
    }
    let name = repo.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "repo".into());
    let problem = ProblemInstance {
        id: name,
        repo: RepoRef::Snapshot { path: repo },
        failing_commit: String::new(),
        failing_patch: None,
        solution: SolutionRef::default(),
        method: CurationMethod::HumanCommitted,
        category: None,
        note: None,
        error_log: String::new(),
        change_stats: ChangeStats::default(),
        verified: VerifiedBuilds::default(),
    };
    let config = agent_config(cfg, a.preset);
    let mut driver = live_driver(cfg)?;
    let sandbox = process_sandbox(cfg);
    let env = EpisodeEnv::new(&sandbox, &OfflineSearch);
    let t = run_episode(&problem, &config, &env, &mut driver, 0);
    let path = write_trajectory(&a.out, &t)?;
    eprintln!("verdict: {}", t.verdict());
    println!("{}", path.display());
    Ok(verdict_code(&t))
}

fn eval(cfg: &CliConfig, a: EvalArgs) -> Outcome {
    let opts = EvalOptions {
        n_samples: cfg.eval.samples,
        ks: cfg.eval.ks.clone(),
        jobs: cfg.eval.jobs,
        policy: if a.exclude_env_errors || cfg.eval.exclude_env_errors {
            EnvErrorPolicy::ExcludeEnvErrors
        } else {
            EnvErrorPolicy::CountAsFailure
        },
        mode: if a.first_k { PassAtKMode::FirstK } else { PassAtKMode::Unbiased },
    };
    let run = if a.dataset.is_dir() {
        let suite = FixtureSuite::load(&a.dataset).map_err(Failure::usage)?;
        let mut configs = suite.configs();
        if !a.preset.is_empty() {
            configs.retain(|c| a.preset.contains(&c.config.preset));
            if configs.is_empty() {
                return Err(Failure::usage("none of the requested presets has a fixture"));
            }
        }
        run_benchmark(&suite.problems(), &configs, &opts, &suite, &suite)
    } else {
        let dataset = load_dataset(&a.dataset).map_err(|e| Failure::usage(format!("{}: {e}", a.dataset.display())))?;
        let presets = if a.preset.is_empty() { vec![AgentPreset::Gradlefixer] } else { a.preset.clone() };
        let configs: Vec<ConfigEntry> = presets
            .iter()
            .map(|&p| ConfigEntry {
                label: p.as_str().to_string(),
                config: agent_config(cfg, p),
            })
            .collect();
        let live = live_driver(cfg)?;
        let setup = SharedSetup::new(process_sandbox(cfg), OfflineSearch);
        let drivers = |_: &ProblemInstance, c: &ConfigEntry, _: u32| -> Result<Box<dyn ModelDriver>, EvalError> {
            Ok(Box::new(live.with_model(&c.config.model_ref)))
        };
        run_benchmark(&dataset, &configs, &opts, &setup, &drivers)
    }
    .map_err(|e| match e {
        EvalError::Domain(_) => Failure::usage(e),
        other => Failure::env(other),
    })?;
    if let Some(dir) = &a.trajectories {
        for (_, t) in &run.trajectories {
            write_trajectory(dir, t)?;
        }
    }
    if let Some(out) = &a.out {
        fs::write(out, run.report.to_json()).map_err(Failure::env)?;
    }
    print!("{}", aggregate_report(&run.report, a.format));
    Ok(EXIT_OK)
}

fn emit(instances: &[ProblemInstance], log: &CurationLog, out: Option<&Path>) -> Outcome {
    match out {
        Some(p) => {
            let f = fs::File::create(p).map_err(Failure::env)?;
            write_dataset(std::io::BufWriter::new(f), instances).map_err(Failure::env)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_dataset(&mut lock, instances).map_err(Failure::env)?;
            lock.flush().map_err(Failure::env)?;
        }
    }
    for s in &log.skipped {
        eprintln!("skipped {}: {}", s.subject, s.reason);
    }
    eprintln!(
        "emitted {}, skipped {}, generation failures {}",
        log.emitted,
        log.skipped.len(),
        log.generation_failures
    );
    Ok(EXIT_OK)
}

fn curate(cfg: &CliConfig, c: CurateCommand) -> Outcome {
    let sandbox = process_sandbox(cfg);
    let mut log = CurationLog::default();
    let mut found = Vec::new();
    let out = match c {
        CurateCommand::Human { repo, prs, out } => {
            let forge = LocalForge::load(&prs).map_err(Failure::usage)?;
            found = Curator::new(repo, &sandbox).curate_all_human(&forge, &mut log).map_err(Failure::env)?;
            out
        }
        CurateCommand::Dep { repo, commits, out } => {
            let curator = Curator::new(repo, &sandbox);
            for commit in &commits {
                found.extend(curator.curate_dependency_augmented(commit, &mut log).map_err(Failure::env)?);
            }
            out
        }
        CurateCommand::Llm { repo, commits, out } => {
            let curator = Curator::new(repo, &sandbox);
            let live = live_driver(cfg)?;
            for commit in &commits {
                let mut driver = live.clone();
                found.extend(
                    curator
                        .curate_llm_generated(commit, &mut driver, RetryPolicy::default(), &mut log)
                        .map_err(Failure::env)?,
                );
            }
            out
        }
    };
    emit(&found, &log, out.as_deref())
}

fn classify(log: &Path, rules: Option<&Path>) -> Outcome {
    let text = fs::read(log).map_err(|e| Failure::usage(format!("{}: {e}", log.display())))?;
    let text = String::from_utf8_lossy(&text);
    let loaded;
    let set = match rules {
        Some(p) => {
            let src = fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            loaded = RuleSet::from_json(&src).map_err(Failure::usage)?;
            &loaded
        }
        None => RuleSet::builtin(),
    };
    let c = set.classify(&text);
    println!("{}\t{}", c.category.as_str(), c.rule_id.as_deref().unwrap_or("-"));
    Ok(EXIT_OK)
}

fn replay(a: ReplayArgs) -> Outcome {
    let fx = ReplayFixture::load(&a.fixture).map_err(Failure::usage)?;
    let t = fx.run();
    if a.update {
        fx.write_expected(&t).map_err(Failure::env)?;
        println!("{}: wrote {} ({})", fx.name, buildbench::fixture::EXPECTED_FILE, t.verdict());
        return Ok(EXIT_OK);
    }
    let diff = fx.check(&t);
    if diff.is_empty() {
        println!("{}: ok ({})", fx.name, t.verdict());
        Ok(EXIT_OK)
    } else {
        println!("{}: trajectory differs from {}", fx.name, buildbench::fixture::EXPECTED_FILE);
        for line in diff {
            println!("{line}");
        }
        Ok(EXIT_UNRESOLVED)
    }
}
