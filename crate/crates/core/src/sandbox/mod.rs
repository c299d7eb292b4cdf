//! Workspace materialization and build execution.
//!
//! A [`Sandbox`] pairs a command [`Backend`] with the build protocol: every
//! canonical build is preceded by `./gradlew clean --stop`, commands run in
//! the workspace root under the workspace's environment, and every command is
//! appended to the workspace's invocation log.

mod jdk;
mod real;
mod scripted;
mod workspace;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use jdk::{JdkRegistry, DEFAULT_JDK, SUPPORTED_JDKS};
pub use real::ProcessBackend;
pub use scripted::{FileCondition, RuleMatch, ScriptedBackend, ScriptedFixture, ScriptedRule};
pub use workspace::{Checkout, Lifecycle, Workspace};

/// Canonical clean command run before every build.
pub const RESET_ARGV: [&str; 3] = ["./gradlew", "clean", "--stop"];
/// Canonical debug build command.
pub const BUILD_ARGV: [&str; 3] = ["./gradlew", "assembleDebug", "--parallel"];

pub const DEFAULT_BUILD_TIMEOUT: Duration = Duration::from_secs(30 * 60);
pub const DEFAULT_COMMAND_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("failed to spawn `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("empty argv")]
    EmptyArgv,
    #[error("workspace preparation failed: {0}")]
    Prepare(String),
    #[error("workspace {0} is not ready")]
    NotReady(String),
    #[error("invalid fixture: {0}")]
    Fixture(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildStatus {
    Success,
    Failure,
    Timeout,
    EnvError,
}

/// Result of one sandbox build (or clean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildOutcome {
    pub status: BuildStatus,
    pub exit_code: Option<i32>,
    pub log: String,
    pub duration_s: f64,
}

impl BuildOutcome {
    pub fn is_success(&self) -> bool {
        self.status == BuildStatus::Success
    }

    fn from_output(out: &CommandOutput) -> Self {
        let status = if out.timed_out {
            BuildStatus::Timeout
        } else if out.exit_code == Some(0) {
            BuildStatus::Success
        } else {
            BuildStatus::Failure
        };
        BuildOutcome {
            status,
            exit_code: out.exit_code,
            log: out.output.clone(),
            duration_s: out.duration.as_secs_f64(),
        }
    }

    fn env_error(err: &SandboxError) -> Self {
        BuildOutcome {
            status: BuildStatus::EnvError,
            exit_code: None,
            log: err.to_string(),
            duration_s: 0.0,
        }
    }
}

/// What a command was issued for; used to audit the build protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Reset,
    Build,
    GradleTask,
    Shell,
    Other,
}

/// One entry of a workspace's invocation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub seq: usize,
    pub kind: CommandKind,
    pub argv: Vec<String>,
    pub exit_code: Option<i32>,
    pub timed_out: bool,
    /// Index of the scripted rule that produced the output, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<usize>,
}

/// Captured result of a single command.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub exit_code: Option<i32>,
    /// Combined stdout and stderr.
    pub output: String,
    pub duration: Duration,
    pub timed_out: bool,
    pub rule: Option<usize>,
}

/// Everything a backend needs to run one command.
pub struct CommandRequest<'a> {
    pub root: &'a Path,
    pub env: &'a BTreeMap<String, String>,
    pub argv: &'a [String],
    pub timeout: Duration,
    /// Commands previously run in this workspace, oldest first.
    pub history: &'a [Invocation],
}

/// Executes commands for a workspace.
pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;
    fn execute(&self, req: &CommandRequest<'_>) -> Result<CommandOutput, SandboxError>;
}

#[derive(Debug, Clone)]
pub struct SandboxConfig {
    pub build_timeout: Duration,
    pub command_timeout: Duration,
    pub jdks: JdkRegistry,
    pub android_sdk_root: Option<PathBuf>,
    /// Parent directory for workspaces; the system temp dir when unset.
    pub work_root: Option<PathBuf>,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            build_timeout: DEFAULT_BUILD_TIMEOUT,
            command_timeout: DEFAULT_COMMAND_TIMEOUT,
            jdks: JdkRegistry::default(),
            android_sdk_root: None,
            work_root: None,
        }
    }
}

impl SandboxConfig {
    /// Defaults plus `ABB_JDK_<v>_HOME` and `ANDROID_SDK_ROOT` from the process env.
    pub fn from_env() -> Self {
        SandboxConfig {
            jdks: JdkRegistry::from_env(),
            android_sdk_root: std::env::var_os("ANDROID_SDK_ROOT").map(PathBuf::from),
            ..SandboxConfig::default()
        }
    }
}

/// A command backend plus the build protocol. Cheap to clone and share.
#[derive(Clone)]
pub struct Sandbox {
    backend: Arc<dyn Backend>,
    config: SandboxConfig,
}

impl std::fmt::Debug for Sandbox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sandbox").field("backend", &self.backend.name()).finish()
    }
}

impl Sandbox {
    pub fn new(backend: Arc<dyn Backend>, config: SandboxConfig) -> Self {
        Sandbox { backend, config }
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.config
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    /// Materializes a fresh, exclusively owned workspace for `checkout`.
    pub fn prepare(&self, label: &str, checkout: &Checkout) -> Result<Workspace, SandboxError> {
        Workspace::materialize(label, checkout, &self.config)
    }

    /// Runs `argv` in the workspace root and records it in the invocation log.
    pub fn run_command(
        &self,
        ws: &mut Workspace,
        argv: &[String],
        timeout: Duration,
        kind: CommandKind,
    ) -> Result<CommandOutput, SandboxError> {
        if argv.is_empty() {
            return Err(SandboxError::EmptyArgv);
        }
        if ws.lifecycle() != Lifecycle::Ready {
            return Err(SandboxError::NotReady(ws.id().to_string()));
        }
        ws.set_lifecycle(Lifecycle::Busy);
        let result = self.backend.execute(&CommandRequest {
            root: ws.root(),
            env: ws.env(),
            argv,
            timeout,
            history: ws.invocations(),
        });
        ws.set_lifecycle(Lifecycle::Ready);
        let seq = ws.invocations().len();
        let (exit_code, timed_out, rule) = match &result {
            Ok(out) => (out.exit_code, out.timed_out, out.rule),
            Err(_) => (None, false, None),
        };
        ws.record(Invocation {
            seq,
            kind,
            argv: argv.to_vec(),
            exit_code,
            timed_out,
            rule,
        });
        result
    }

    /// `./gradlew clean --stop`. A failing clean is reported, never fatal.
    pub fn reset_build_state(&self, ws: &mut Workspace) -> BuildOutcome {
        let argv = to_argv(&RESET_ARGV);
        match self.run_command(ws, &argv, self.config.command_timeout, CommandKind::Reset) {
            Ok(out) => BuildOutcome::from_output(&out),
            Err(err) => BuildOutcome::env_error(&err),
        }
    }

    /// `./gradlew assembleDebug --parallel` under the workspace env.
    pub fn run_build(&self, ws: &mut Workspace) -> BuildOutcome {
        let argv = to_argv(&BUILD_ARGV);
        match self.run_command(ws, &argv, self.config.build_timeout, CommandKind::Build) {
            Ok(out) => BuildOutcome::from_output(&out),
            Err(err) => BuildOutcome::env_error(&err),
        }
    }

    /// Reset followed by build; the sequence every harness build uses.
    pub fn clean_build(&self, ws: &mut Workspace) -> (BuildOutcome, BuildOutcome) {
        let reset = self.reset_build_state(ws);
        let build = self.run_build(ws);
        (reset, build)
    }
}

pub(crate) fn to_argv(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

/// Checks the clean-before-build protocol over an invocation log.
///
/// Returns the sequence numbers of builds that were not preceded by a reset,
/// ignoring commands that are neither resets nor builds.
pub fn clean_before_build_violations(log: &[Invocation]) -> Vec<usize> {
    let mut armed = false;
    let mut violations = Vec::new();
    for inv in log {
        match inv.kind {
            CommandKind::Reset => armed = true,
            CommandKind::Build => {
                if !armed {
                    violations.push(inv.seq);
                }
                armed = false;
            }
            _ => {}
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv(seq: usize, kind: CommandKind) -> Invocation {
        Invocation {
            seq,
            kind,
            argv: vec![],
            exit_code: Some(0),
            timed_out: false,
            rule: None,
        }
    }

    #[test]
    fn protocol_audit_ignores_unrelated_commands() {
        let log = vec![
            inv(0, CommandKind::Reset),
            inv(1, CommandKind::Other),
            inv(2, CommandKind::Build),
            inv(3, CommandKind::Build),
        ];
        assert_eq!(clean_before_build_violations(&log), vec![3]);
    }
}
