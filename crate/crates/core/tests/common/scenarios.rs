//! Randomized and adversarial scenarios shared by the focused tests and the
//! acceptance summary.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fs;
use std::os::unix::fs::symlink;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde_json::{json, Value};

use buildbench::agent::{run_episode, AgentConfig, EpisodeEnv};
use buildbench::benchmark::{ChangeStats, CurationMethod, ProblemInstance, RepoRef, SolutionRef, VerifiedBuilds};
use buildbench::llm::{ReplayDriver, ReplayScript, ReplayTurn, ScriptedToolCall};
use buildbench::sandbox::{
    clean_before_build_violations, Checkout, CommandKind, Invocation, Sandbox, SandboxConfig, ScriptedBackend,
    ScriptedFixture, BUILD_ARGV, RESET_ARGV,
};
use buildbench::toolkit::{OfflineSearch, ToolCall, ToolContext, ToolId, ToolLimits, ToolRegistry};

/// Tool-ablation rows as labelled in the results table, with the extra tools
/// each label names. TOOL_A builds, TOOL_B runs a Gradle task, TOOL_C sets
/// the Java version.
pub const ABLATION_ROWS: [(&str, &[&str]); 8] = [
    ("No shell (Baseline)", &[]),
    ("Only shell", &["run_shell"]),
    ("Only TOOL_B", &["gradle_task"]),
    ("Only TOOL_A", &["gradle_build"]),
    ("TOOL_A + TOOL_B", &["gradle_build", "gradle_task"]),
    ("TOOL_A + TOOL_C", &["gradle_build", "set_java_version"]),
    ("Shell + TOOL_A + TOOL_B + TOOL_C", &["run_shell", "gradle_build", "gradle_task", "set_java_version"]),
    ("TOOL_A + TOOL_B + TOOL_C (Ours)", &["gradle_build", "gradle_task", "set_java_version"]),
];

pub const BASE_TOOLS: [&str; 6] = ["list_directory", "search_file_content", "glob", "read_file", "replace", "search_google"];

pub fn snapshot_problem(id: &str, path: &Path) -> ProblemInstance {
    ProblemInstance {
        id: id.into(),
        repo: RepoRef::Snapshot { path: path.to_path_buf() },
        failing_commit: String::new(),
        failing_patch: None,
        solution: SolutionRef::default(),
        method: CurationMethod::HumanCommitted,
        category: None,
        note: None,
        error_log: String::new(),
        change_stats: ChangeStats { files_changed: 1, lines_changed: 1, binary_files: 0 },
        verified: VerifiedBuilds { failing_build_fails: true, solution_builds: true },
    }
}

const PROTOCOL_RULES: &str = r#"{"rules":[
  {"match":{"argv_prefix":["./gradlew","clean"]},"stdout":"BUILD SUCCESSFUL\n"},
  {"match":{"argv_prefix":["./gradlew","assembleDebug"],"when":[{"file":"app/Main.kt","contains":"FIXED"}]},
   "stdout":"BUILD SUCCESSFUL\n"},
  {"match":{"argv_prefix":["./gradlew","assembleDebug"]},"stdout":"e: Main.kt:1 broken\nBUILD FAILED\n","exit":1},
  {"match":{"argv_prefix":["./gradlew"]},"stdout":"BUILD SUCCESSFUL\n"},
  {"match":{"argv_prefix":["sh","-c"]},"stdout":"ok\n"}
]}"#;

fn call(name: &str, arguments: Value) -> ScriptedToolCall {
    ScriptedToolCall {
        id: None,
        name: name.into(),
        arguments,
    }
}

fn action() -> impl Strategy<Value = ScriptedToolCall> {
    prop_oneof![
        Just(call("gradle_build", json!({}))),
        Just(call("gradle_build", json!({}))),
        prop::sample::select(vec!["clean", "assembleDebug", "app:dependencies", "lint", "--stop"])
            .prop_map(|t| call("gradle_task", json!({"task": t, "flags": "--parallel"}))),
        prop::sample::select(vec!["./gradlew assembleDebug", "./gradlew clean --stop", "ls", "cat app/Main.kt"])
            .prop_map(|c| call("run_shell", json!({"shell_command": c}))),
        Just(call("replace", json!({"file_path": "app/Main.kt", "old_string": "BROKEN", "new_string": "FIXED"}))),
        Just(call("replace", json!({"file_path": "app/Main.kt", "old_string": "FIXED", "new_string": "BROKEN"}))),
        Just(call("read_file", json!({"path": "app/Main.kt"}))),
        prop::sample::select(vec![11u32, 17, 21]).prop_map(|v| call("set_java_version", json!({"version": v}))),
    ]
}

fn script() -> impl Strategy<Value = ReplayScript> {
    prop::collection::vec(prop::collection::vec(action(), 0..3), 0..12).prop_map(|turns| ReplayScript {
        model: "replay".into(),
        turns: turns
            .into_iter()
            .map(|tool_calls| ReplayTurn {
                text: String::new(),
                tool_calls,
                usage: None,
                prompt_hash: None,
            })
            .collect(),
    })
}

/// Positions of builds whose nearest earlier reset-or-build is not a reset.
pub fn oracle_violations(log: &[Invocation]) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, inv) in log.iter().enumerate() {
        if inv.kind != CommandKind::Build {
            continue;
        }
        let prev = log[..i]
            .iter()
            .rev()
            .find(|p| matches!(p.kind, CommandKind::Reset | CommandKind::Build));
        let reset_first = prev.is_some_and(|p| p.argv == RESET_ARGV && p.kind == CommandKind::Reset);
        if inv.argv != BUILD_ARGV || !reset_first {
            out.push(i);
        }
    }
    out
}

#[derive(Debug, Default)]
pub struct ProtocolRun {
    pub episodes: usize,
    /// Violations found by [`oracle_violations`], then by the library audit.
    pub violations: usize,
    pub audit_violations: usize,
    pub builds: usize,
    /// Model-issued commands that mention assembleDebug without being builds.
    pub model_builds: usize,
    pub leftover_workspaces: usize,
    pub first_bad_log: Option<Vec<Invocation>>,
}

/// Runs `cases` random scripted episodes with every command tool available.
pub fn protocol_episodes(cases: u32) -> ProtocolRun {
    let tmp = tempfile::tempdir().unwrap();
    let snap = tmp.path().join("snap");
    fs::create_dir_all(snap.join("app")).unwrap();
    fs::write(snap.join("app/Main.kt"), "val x = BROKEN\n").unwrap();
    fs::write(snap.join("gradlew"), "#!/bin/sh\n").unwrap();
    let work = tmp.path().join("work");
    fs::create_dir_all(&work).unwrap();

    let sandbox = Sandbox::new(
        Arc::new(ScriptedBackend::new(ScriptedFixture::from_json(PROTOCOL_RULES).unwrap())),
        SandboxConfig {
            work_root: Some(work.clone()),
            ..SandboxConfig::default()
        },
    );
    let search = OfflineSearch;
    let env = EpisodeEnv::new(&sandbox, &search);
    let config = AgentConfig::custom(
        &["gradle_build".into(), "gradle_task".into(), "run_shell".into(), "set_java_version".into()],
        "replay",
    )
    .unwrap();
    let inst = snapshot_problem("protocol", &snap);

    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    let out = RefCell::new(ProtocolRun::default());
    runner
        .run(&script(), |s| {
            let mut driver = ReplayDriver::new(s);
            let t = run_episode(&inst, &config, &env, &mut driver, 0);
            let log = &t.verdict.commands;
            let mut o = out.borrow_mut();
            o.episodes += 1;
            let v = oracle_violations(log).len();
            o.violations += v;
            o.audit_violations += clean_before_build_violations(log).len();
            if v > 0 && o.first_bad_log.is_none() {
                o.first_bad_log = Some(log.clone());
            }
            o.builds += log.iter().filter(|i| i.kind == CommandKind::Build).count();
            o.model_builds += log
                .iter()
                .filter(|i| i.kind != CommandKind::Build && i.argv.iter().any(|a| a.contains("assembleDebug")))
                .count();
            Ok(())
        })
        .unwrap();
    let mut o = out.into_inner();
    o.leftover_workspaces = fs::read_dir(&work).unwrap().count();
    o
}

pub const SECRET: &str = "TOPSECRET-7f3a";
const HIDDEN_NAME: &str = "zz_unlisted_entry.txt";

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(dir)
        .follow_links(false)
        .into_iter()
        .map(|e| e.unwrap())
        .map(|e| {
            let bytes = if e.file_type().is_file() { fs::read(e.path()).unwrap() } else { Vec::new() };
            (e.path().to_path_buf(), bytes)
        })
        .collect()
}

/// 50 paths, each of which names something outside the workspace root.
pub fn adversarial_paths(root: &Path, outside: &Path) -> Vec<String> {
    let secret = outside.join("secret.txt");
    let mut paths = vec![
        secret.display().to_string(),
        outside.display().to_string(),
        "/etc/passwd".into(),
        "/etc".into(),
        "/".into(),
        format!("{}/../outside/secret.txt", root.display()),
        format!("{}/./../outside", root.display()),
        format!("{}/app/../../outside/secret.txt", root.display()),
        "link_file".into(),
        "link_dir".into(),
        "link_dir/secret.txt".into(),
        "./link_dir/secret.txt".into(),
        "app/../link_dir/secret.txt".into(),
        "link_rel".into(),
        "link_rel/secret.txt".into(),
        "app/nested_link".into(),
        "app/nested_link/secret.txt".into(),
        "link_dir/new_file.txt".into(),
        "link_dir/deeper/new_file.txt".into(),
        "link_dir/./secret.txt".into(),
    ];
    for depth in 1..=10 {
        paths.push(format!("{}outside/secret.txt", "../".repeat(depth)));
    }
    for depth in 1..=10 {
        paths.push(format!("app/{}outside", "../".repeat(depth + 1)));
    }
    for depth in 1..=5 {
        paths.push(format!("app/src/{}secret.txt", "../".repeat(depth + 2)));
        paths.push(format!("./{}etc/passwd", "../".repeat(depth + 3)));
    }
    paths
}

#[derive(Debug, Default)]
pub struct ConfinementRun {
    pub paths: usize,
    pub calls: usize,
    pub accepted: Vec<String>,
    pub leaks: Vec<String>,
    pub outside_modified: bool,
}

/// Every file tool against every adversarial path, plus walks from inside
/// the root past planted symlinks.
pub fn confinement_fuzz() -> ConfinementRun {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path().canonicalize().unwrap();
    let outside = base.join("outside");
    fs::create_dir_all(&outside).unwrap();
    fs::write(outside.join("secret.txt"), format!("{SECRET}\n")).unwrap();
    fs::write(outside.join(HIDDEN_NAME), format!("{SECRET}\n")).unwrap();

    let snap = base.join("snap");
    fs::create_dir_all(snap.join("app/src")).unwrap();
    fs::write(snap.join("app/src/Main.kt"), super::MAIN_KT).unwrap();

    let work = base.join("work");
    fs::create_dir_all(&work).unwrap();
    let sandbox = super::process_sandbox(&work);
    let mut ws = sandbox
        .prepare("confine", &Checkout::Snapshot { path: snap.clone() })
        .unwrap();
    let root = ws.root().canonicalize().unwrap();
    symlink(outside.join("secret.txt"), root.join("link_file")).unwrap();
    symlink(&outside, root.join("link_dir")).unwrap();
    let up = "../".repeat(root.strip_prefix(&base).unwrap().components().count());
    symlink(format!("{up}outside"), root.join("link_rel")).unwrap();
    symlink(&outside, root.join("app/nested_link")).unwrap();
    assert_eq!(fs::read_to_string(root.join("link_rel/secret.txt")).unwrap().trim(), SECRET);

    let before = tree(&outside);
    let registry = ToolRegistry::new(&ToolId::ALL).unwrap();
    let search = OfflineSearch;
    let mut ctx = ToolContext {
        sandbox: &sandbox,
        workspace: &mut ws,
        search: &search,
        limits: ToolLimits::default(),
    };
    let mut out = ConfinementRun::default();
    let mut check = |call: &ToolCall, p: &str, must_reject: bool, out: &mut ConfinementRun| {
        let exec = registry.execute(call, &mut ctx);
        out.calls += 1;
        if must_reject && exec.result.is_ok() {
            out.accepted.push(format!("{} {p:?}", call.name));
        }
        let payload = &exec.result.payload;
        if payload.contains(SECRET) || payload.contains(HIDDEN_NAME) {
            out.leaks.push(format!("{} {p:?}: {payload}", call.name));
        }
    };

    let paths = adversarial_paths(&root, &outside);
    out.paths = paths.len();
    for (i, p) in paths.iter().enumerate() {
        for call in [
            ToolCall::new(format!("r{i}"), "read_file", json!({"path": p})),
            ToolCall::new(format!("l{i}"), "list_directory", json!({"path": p})),
            ToolCall::new(format!("s{i}"), "search_file_content", json!({"pattern": "TOPSECRET", "path": p})),
            ToolCall::new(format!("g{i}"), "glob", json!({"pattern": "**/*", "path": p})),
            ToolCall::new(
                format!("w{i}"),
                "replace",
                json!({"file_path": p, "old_string": SECRET, "new_string": "PWNED"}),
            ),
        ] {
            check(&call, p, true, &mut out);
        }
    }
    for call in [
        ToolCall::new("x1", "search_file_content", json!({"pattern": "TOPSECRET"})),
        ToolCall::new("x2", "glob", json!({"pattern": "**/*.txt"})),
        ToolCall::new("x3", "glob", json!({"pattern": "../outside/*"})),
        ToolCall::new("x4", "list_directory", json!({"path": "."})),
    ] {
        check(&call, ".", false, &mut out);
    }
    out.outside_modified = tree(&outside) != before || outside.join("new_file.txt").exists();
    out
}
