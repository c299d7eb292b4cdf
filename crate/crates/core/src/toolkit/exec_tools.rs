//! Command-backed tools: the general shell and the three Gradle abstractions.
//!
//! `gradle_task` and `set_java_version` never go through a shell: arguments
//! are validated and passed as an argv vector.

use std::sync::LazyLock;

use regex::Regex;

use super::spec::{ToolCall, ToolErrorKind, ToolResult};
use super::{ToolContext, ToolExecution};
use crate::sandbox::{BuildStatus, CommandKind, CommandOutput, SandboxError};

const ALLOWED_FLAGS: [&str; 14] = [
    "--stacktrace",
    "--full-stacktrace",
    "--info",
    "--debug",
    "--warn",
    "--quiet",
    "--parallel",
    "--offline",
    "--refresh-dependencies",
    "--dry-run",
    "--continue",
    "--rerun-tasks",
    "--no-build-cache",
    "--no-daemon",
];

static TASK_NAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^:?[A-Za-z][A-Za-z0-9_\-]*(:[A-Za-z][A-Za-z0-9_\-]*)*$").unwrap());

/// Accepts one Gradle task path such as `assembleDebug` or `:app:dependencies`.
pub fn validate_gradle_task(task: &str) -> Result<(), String> {
    if TASK_NAME.is_match(task) {
        Ok(())
    } else {
        Err(format!("invalid task `{task}`: expected a single Gradle task name"))
    }
}

/// Splits and checks the flag string against the whitelist.
pub fn validate_gradle_flags(flags: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for flag in flags.split_whitespace() {
        let ok = ALLOWED_FLAGS.contains(&flag)
            || flag
                .strip_prefix("--warning-mode=")
                .is_some_and(|m| matches!(m, "all" | "summary" | "none" | "fail"));
        if !ok {
            return Err(format!("invalid flag `{flag}`"));
        }
        out.push(flag.to_string());
    }
    Ok(out)
}

fn gradlew_missing(ctx: &ToolContext<'_>) -> bool {
    !ctx.workspace.root().join("gradlew").is_file()
}

fn command_payload(out: &CommandOutput) -> String {
    match out.exit_code {
        Some(code) => format!("exit code: {code}\n{}", out.output),
        None => format!("exit code: none\n{}", out.output),
    }
}

fn spawn_error(call: &ToolCall, err: SandboxError) -> ToolResult {
    ToolResult::error(call, ToolErrorKind::Environment, err.to_string())
}

pub(super) fn run_shell(call: &ToolCall, ctx: &mut ToolContext<'_>) -> ToolResult {
    let command = call.str_arg("shell_command").unwrap_or_default();
    if command.trim().is_empty() {
        return ToolResult::error(call, ToolErrorKind::InvalidArguments, "empty shell_command");
    }
    let argv = vec!["sh".to_string(), "-c".to_string(), command.to_string()];
    let timeout = ctx.limits.shell_timeout;
    match ctx
        .sandbox
        .run_command(ctx.workspace, &argv, timeout, CommandKind::Shell)
    {
        Ok(out) if out.timed_out => ToolResult::error(
            call,
            ToolErrorKind::Timeout,
            format!("command timed out after {}s\n{}", timeout.as_secs_f64(), out.output),
        ),
        Ok(out) => ToolResult::ok(call, command_payload(&out)),
        Err(e) => spawn_error(call, e),
    }
}

pub(super) fn gradle_build(call: &ToolCall, ctx: &mut ToolContext<'_>) -> ToolExecution {
    if gradlew_missing(ctx) {
        return ToolResult::error(call, ToolErrorKind::Environment, "no ./gradlew in workspace root").into();
    }
    let (_reset, build) = ctx.sandbox.clean_build(ctx.workspace);
    let result = match build.status {
        BuildStatus::Success | BuildStatus::Failure => ToolResult::ok(call, build.log.clone()),
        BuildStatus::Timeout => ToolResult::error(
            call,
            ToolErrorKind::Timeout,
            format!("build timed out after {:.0}s\n{}", build.duration_s, build.log),
        ),
        BuildStatus::EnvError => ToolResult::error(call, ToolErrorKind::Environment, build.log.clone()),
    };
    ToolExecution {
        result,
        build: Some(build),
    }
}

pub(super) fn gradle_task(call: &ToolCall, ctx: &mut ToolContext<'_>) -> ToolResult {
    let task = call.str_arg("task").unwrap_or_default().trim();
    if let Err(msg) = validate_gradle_task(task) {
        return ToolResult::error(call, ToolErrorKind::Rejected, msg);
    }
    let flags = match validate_gradle_flags(call.str_arg("flags").unwrap_or_default()) {
        Ok(f) => f,
        Err(msg) => return ToolResult::error(call, ToolErrorKind::Rejected, msg),
    };
    if gradlew_missing(ctx) {
        return ToolResult::error(call, ToolErrorKind::Environment, "no ./gradlew in workspace root");
    }
    let mut argv = vec!["./gradlew".to_string(), task.to_string()];
    argv.extend(flags);
    let timeout = ctx.sandbox.config().build_timeout;
    match ctx
        .sandbox
        .run_command(ctx.workspace, &argv, timeout, CommandKind::GradleTask)
    {
        Ok(out) if out.timed_out => ToolResult::error(
            call,
            ToolErrorKind::Timeout,
            format!("task timed out after {}s\n{}", timeout.as_secs_f64(), out.output),
        ),
        Ok(out) => ToolResult::ok(call, command_payload(&out)),
        Err(e) => spawn_error(call, e),
    }
}

pub(super) fn set_java_version(call: &ToolCall, ctx: &mut ToolContext<'_>) -> ToolResult {
    let requested = call.str_arg("version").unwrap_or_default();
    let Some((version, _)) = ctx.workspace.jdks().resolve(requested) else {
        return ToolResult::error(
            call,
            ToolErrorKind::InvalidArguments,
            format!(
                "unknown Java version `{requested}`; available: {}",
                ctx.workspace.jdks().available_list()
            ),
        );
    };
    let home = ctx
        .workspace
        .select_jdk(version)
        .expect("resolved versions have a home");
    ToolResult::ok(
        call,
        format!("JAVA_HOME={}\nJDK {version} is now used for all subsequent commands.", home.display()),
    )
}

/// What a raw shell command was trying to do, for tool-usage accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShellIntent {
    /// A debug build through the wrapper (the shell form of `gradle_build`).
    Build,
    /// Any other Gradle wrapper invocation (the shell form of `gradle_task`).
    GradleTask,
    /// Switching JDKs (the shell form of `set_java_version`).
    JavaSwitch,
}

/// Classifies a `run_shell` command line by the domain operation it performs.
pub fn classify_shell_command(command: &str) -> Option<ShellIntent> {
    static JAVA: LazyLock<Regex> = LazyLock::new(|| {
        Regex::new(r"JAVA_HOME\s*=|update-alternatives\s+.*java|sdk\s+use\s+java|jenv\s+(global|local|shell)")
            .unwrap()
    });
    static BUILD: LazyLock<Regex> =
        LazyLock::new(|| Regex::new(r"(\./)?gradlew?\b[^;&|]*\bassemble\w*").unwrap());
    static GRADLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\./)?gradlew?\b").unwrap());
    if JAVA.is_match(command) {
        Some(ShellIntent::JavaSwitch)
    } else if BUILD.is_match(command) {
        Some(ShellIntent::Build)
    } else if GRADLE.is_match(command) {
        Some(ShellIntent::GradleTask)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_validation_rejects_injection() {
        for ok in ["assembleDebug", "tasks", ":app:dependencies", "app:kaptDebugKotlin"] {
            assert!(validate_gradle_task(ok).is_ok(), "{ok}");
        }
        for bad in [
            "clean; rm -rf /",
            "tasks && curl x",
            "$(reboot)",
            "a b",
            "`id`",
            "",
            "--stacktrace",
            "task|tee",
        ] {
            assert!(validate_gradle_task(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn flag_whitelist() {
        assert_eq!(
            validate_gradle_flags("--stacktrace --info").unwrap(),
            vec!["--stacktrace", "--info"]
        );
        assert!(validate_gradle_flags("--warning-mode=all").is_ok());
        assert!(validate_gradle_flags("--init-script=/tmp/x").is_err());
        assert!(validate_gradle_flags("; rm").is_err());
        assert!(validate_gradle_flags("").unwrap().is_empty());
    }

    #[test]
    fn shell_intents() {
        assert_eq!(
            classify_shell_command("./gradlew assembleDebug --parallel"),
            Some(ShellIntent::Build)
        );
        assert_eq!(
            classify_shell_command("export JAVA_HOME=/usr/lib/jvm/java-17 && ./gradlew assembleDebug"),
            Some(ShellIntent::JavaSwitch)
        );
        assert_eq!(
            classify_shell_command("./gradlew app:dependencies"),
            Some(ShellIntent::GradleTask)
        );
        assert_eq!(classify_shell_command("grep -r foo ."), None);
    }
}
