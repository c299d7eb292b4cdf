//! Deterministic command backend driven by a rule table.
//!
//! Rules are checked in order and the first match answers the command. Rules
//! can be gated on the workspace's file contents, which lets a fixture model a
//! build that starts passing once the right edit lands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, CommandOutput, CommandRequest, SandboxError};

/// Exit code reported for commands no rule matches.
pub const UNEXPECTED_EXIT: i32 = 127;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedFixture {
    /// Directory copied into each workspace (resolved relative to the fixture file).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_dir: Option<PathBuf>,
    pub rules: Vec<ScriptedRule>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedRule {
    #[serde(rename = "match", default)]
    pub matcher: RuleMatch,
    #[serde(default)]
    pub stdout: String,
    /// Read into `stdout` at load time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stdout_file: Option<PathBuf>,
    #[serde(default)]
    pub stderr: String,
    #[serde(default)]
    pub exit: i32,
    #[serde(default)]
    pub duration_s: f64,
}

/// Conditions a command must satisfy for a rule to fire. Absent fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleMatch {
    /// Leading argv elements, compared exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argv_prefix: Option<Vec<String>>,
    /// Substring of the space-joined command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    /// Position of the command in the workspace's invocation log.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<usize>,
    /// How many earlier commands matched the argv conditions of this rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occurrence: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub when: Vec<FileCondition>,
}

/// A predicate over one workspace file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FileCondition {
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lacks: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exists: Option<bool>,
}

impl FileCondition {
    fn holds(&self, root: &Path) -> bool {
        let path = root.join(&self.file);
        let content = fs::read_to_string(&path).ok();
        if let Some(exists) = self.exists {
            if exists != content.is_some() {
                return false;
            }
        }
        if let Some(needle) = &self.contains {
            if !content.as_deref().is_some_and(|c| c.contains(needle.as_str())) {
                return false;
            }
        }
        if let Some(needle) = &self.lacks {
            if content.as_deref().is_some_and(|c| c.contains(needle.as_str())) {
                return false;
            }
        }
        true
    }
}

impl RuleMatch {
    fn argv_matches(&self, argv: &[String]) -> bool {
        if let Some(prefix) = &self.argv_prefix {
            if prefix.len() > argv.len() || prefix.iter().zip(argv).any(|(p, a)| p != a) {
                return false;
            }
        }
        if let Some(needle) = &self.contains {
            if !argv.join(" ").contains(needle.as_str()) {
                return false;
            }
        }
        true
    }

    fn matches(&self, req: &CommandRequest<'_>) -> bool {
        if !self.argv_matches(req.argv) {
            return false;
        }
        if let Some(seq) = self.seq {
            if req.history.len() != seq {
                return false;
            }
        }
        if let Some(n) = self.occurrence {
            let seen = req
                .history
                .iter()
                .filter(|inv| self.argv_matches(&inv.argv))
                .count();
            if seen != n {
                return false;
            }
        }
        self.when.iter().all(|c| c.holds(req.root))
    }
}

impl ScriptedFixture {
    pub fn from_json(text: &str) -> Result<Self, SandboxError> {
        serde_json::from_str(text).map_err(|e| SandboxError::Fixture(e.to_string()))
    }

    /// Loads a fixture file, resolving `seed_dir` and `stdout_file` against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, SandboxError> {
        let text = fs::read_to_string(path)
            .map_err(|e| SandboxError::Fixture(format!("{}: {e}", path.display())))?;
        let mut fixture = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(seed) = &fixture.seed_dir {
            fixture.seed_dir = Some(base.join(seed));
        }
        for rule in &mut fixture.rules {
            if let Some(file) = rule.stdout_file.take() {
                let p = base.join(&file);
                rule.stdout = fs::read_to_string(&p)
                    .map_err(|e| SandboxError::Fixture(format!("{}: {e}", p.display())))?;
            }
        }
        Ok(fixture)
    }
}

/// Backend answering commands from a [`ScriptedFixture`] without spawning anything.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    fixture: ScriptedFixture,
}

impl ScriptedBackend {
    pub fn new(fixture: ScriptedFixture) -> Self {
        ScriptedBackend { fixture }
    }

    pub fn fixture(&self) -> &ScriptedFixture {
        &self.fixture
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn execute(&self, req: &CommandRequest<'_>) -> Result<CommandOutput, SandboxError> {
        if req.argv.is_empty() {
            return Err(SandboxError::EmptyArgv);
        }
        let hit = self
            .fixture
            .rules
            .iter()
            .enumerate()
            .find(|(_, rule)| rule.matcher.matches(req));
        let Some((index, rule)) = hit else {
            return Ok(CommandOutput {
                exit_code: Some(UNEXPECTED_EXIT),
                output: format!("scripted backend: unexpected command: {}\n", req.argv.join(" ")),
                duration: Duration::ZERO,
                timed_out: false,
                rule: None,
            });
        };
        let output = format!("{}{}", rule.stdout, rule.stderr);
        let simulated = Duration::from_secs_f64(rule.duration_s.max(0.0));
        if simulated > req.timeout {
            return Ok(CommandOutput {
                exit_code: None,
                output,
                duration: req.timeout,
                timed_out: true,
                rule: Some(index),
            });
        }
        Ok(CommandOutput {
            exit_code: Some(rule.exit),
            output,
            duration: simulated,
            timed_out: false,
            rule: Some(index),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sandbox::{CommandKind, Invocation};
    use std::collections::BTreeMap;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn request<'a>(
        root: &'a Path,
        env: &'a BTreeMap<String, String>,
        argv: &'a [String],
        history: &'a [Invocation],
    ) -> CommandRequest<'a> {
        CommandRequest {
            root,
            env,
            argv,
            timeout: Duration::from_secs(60),
            history,
        }
    }

    fn fixture() -> ScriptedFixture {
        ScriptedFixture::from_json(
            r#"{"rules":[
                {"match":{"argv_prefix":["./gradlew","assembleDebug"],"when":[{"file":"A.kt","contains":"fixed"}]},
                 "stdout":"BUILD SUCCESSFUL\n"},
                {"match":{"argv_prefix":["./gradlew","assembleDebug"],"occurrence":0},
                 "stdout":"first\n","exit":1},
                {"match":{"argv_prefix":["./gradlew","assembleDebug"]},
                 "stdout":"BUILD FAILED\n","exit":1,"duration_s":5},
                {"match":{"contains":"slow"},"stdout":"partial","duration_s":120}
            ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn first_matching_rule_wins_and_occurrence_counts_history() {
        let dir = tempfile::tempdir().unwrap();
        let env = BTreeMap::new();
        let backend = ScriptedBackend::new(fixture());
        let a = argv("./gradlew assembleDebug --parallel");
        let out = backend.execute(&request(dir.path(), &env, &a, &[])).unwrap();
        assert_eq!((out.output.as_str(), out.rule), ("first\n", Some(1)));

        let history = vec![Invocation {
            seq: 0,
            kind: CommandKind::Build,
            argv: a.clone(),
            exit_code: Some(1),
            timed_out: false,
            rule: Some(1),
        }];
        let out = backend.execute(&request(dir.path(), &env, &a, &history)).unwrap();
        assert_eq!(out.rule, Some(2));
        assert_eq!(out.duration, Duration::from_secs(5));

        fs::write(dir.path().join("A.kt"), "fixed").unwrap();
        let out = backend.execute(&request(dir.path(), &env, &a, &history)).unwrap();
        assert_eq!(out.exit_code, Some(0));
        assert_eq!(out.output, "BUILD SUCCESSFUL\n");
    }

    #[test]
    fn unmatched_command_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let env = BTreeMap::new();
        let a = argv("ls -la");
        let out = ScriptedBackend::new(fixture())
            .execute(&request(dir.path(), &env, &a, &[]))
            .unwrap();
        assert_eq!(out.exit_code, Some(UNEXPECTED_EXIT));
        assert!(out.output.contains("unexpected command: ls -la"));
        assert_eq!(out.rule, None);
    }

    #[test]
    fn simulated_duration_beyond_limit_times_out() {
        let dir = tempfile::tempdir().unwrap();
        let env = BTreeMap::new();
        let a = argv("run slow");
        let mut req = request(dir.path(), &env, &a, &[]);
        req.timeout = Duration::from_secs(60);
        let out = ScriptedBackend::new(fixture()).execute(&req).unwrap();
        assert!(out.timed_out);
        assert_eq!(out.exit_code, None);
        assert_eq!(out.output, "partial");
        assert!(out.duration >= req.timeout);
    }
}
