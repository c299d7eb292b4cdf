//! Shared helpers for the integration tests: throwaway git repositories with
//! a shell-script `gradlew`, sandboxes, and instance verification.
#![allow(dead_code)]

pub mod scenarios;

use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use buildbench::benchmark::{LocalForge, ProblemInstance, PullRequest};
use buildbench::git::Git;
use buildbench::llm::{ReplayScript, ReplayTurn};
use buildbench::sandbox::{BuildStatus, ProcessBackend, Sandbox, SandboxConfig};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Fails on any source line containing `BROKEN`, and on uses of `newApi`
/// unless a build file pins lib 2.x. `clean` always succeeds.
pub const GRADLEW: &str = r#"#!/bin/sh
case "$1" in
  clean) echo "> Task :clean"; echo "BUILD SUCCESSFUL"; exit 0 ;;
esac
fail() {
  echo "$1"
  echo
  echo "FAILURE: Build failed with an exception."
  echo "BUILD FAILED"
  exit 1
}
hit=$(grep -rln BROKEN src 2>/dev/null | head -n 1)
if [ -n "$hit" ]; then
  fail "e: file:///$hit:1:1 Unresolved reference 'BROKEN'."
fi
if grep -rq newApi src 2>/dev/null; then
  if ! grep -qs 'com.example:lib:2' build.gradle && ! grep -qs 'lib = "2' gradle/libs.versions.toml; then
    fail "Could not resolve all files for configuration ':app:debugCompileClasspath'.
   > Could not find method newApi() in com.example:lib:1.0."
  fi
fi
echo "> Task :app:assembleDebug"
echo "BUILD SUCCESSFUL"
"#;

pub struct Repo {
    pub dir: PathBuf,
}

impl Repo {
    pub fn init(dir: &Path) -> Repo {
        fs::create_dir_all(dir).unwrap();
        let r = Repo { dir: dir.to_path_buf() };
        r.git(&["init", "-q", "-b", "main"]);
        r.write("gradlew", GRADLEW);
        fs::set_permissions(dir.join("gradlew"), fs::Permissions::from_mode(0o755)).unwrap();
        r
    }

    pub fn git(&self, args: &[&str]) -> String {
        let out = Command::new("git")
            .args(args)
            .current_dir(&self.dir)
            .env("GIT_AUTHOR_NAME", "Fixture Author")
            .env("GIT_AUTHOR_EMAIL", "author@example.com")
            .env("GIT_COMMITTER_NAME", "Fixture Author")
            .env("GIT_COMMITTER_EMAIL", "author@example.com")
            .env("GIT_AUTHOR_DATE", "2024-01-01T00:00:00Z")
            .env("GIT_COMMITTER_DATE", "2024-01-01T00:00:00Z")
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .env("HOME", &self.dir)
            .output()
            .expect("git runs");
        assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8_lossy(&out.stdout).trim().to_string()
    }

    pub fn write(&self, rel: &str, text: &str) {
        let p = self.dir.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, text).unwrap();
    }

    pub fn commit(&self, msg: &str) -> String {
        self.git(&["add", "-A"]);
        self.git(&["commit", "-q", "-m", msg]);
        self.git(&["rev-parse", "HEAD"])
    }

    pub fn tag(&self, name: &str, message: &str) {
        self.git(&["tag", "-a", name, "-m", message]);
    }

    pub fn url(&self) -> String {
        self.dir.to_string_lossy().into_owned()
    }
}

pub fn process_sandbox(work_root: &Path) -> Sandbox {
    Sandbox::new(
        Arc::new(ProcessBackend),
        SandboxConfig {
            work_root: Some(work_root.to_path_buf()),
            ..SandboxConfig::default()
        },
    )
}

pub const MAIN_KT: &str = "fun main() {\n    println(\"hi\")\n}\n";
pub const BUILD_GRADLE_V1: &str = "dependencies {\n    implementation 'com.example:lib:1.0'\n}\n";
pub const BUILD_GRADLE_V2: &str = "dependencies {\n    implementation 'com.example:lib:2.0'\n}\n";

fn base(dir: &Path) -> Repo {
    let r = Repo::init(dir);
    r.write("src/Main.kt", MAIN_KT);
    r.write("build.gradle", BUILD_GRADLE_V1);
    r.write("settings.gradle", "rootProject.name = 'fixture'\n");
    r
}

/// One curation job of the fixture suite.
pub enum Job {
    Human { repo: String, forge: LocalForge },
    Dep { repo: String, commits: Vec<String> },
    Llm { repo: String, commits: Vec<(String, ReplayScript)> },
}

pub struct GitSuite {
    pub jobs: Vec<Job>,
    pub repos: usize,
}

fn reply(text: &str) -> ReplayScript {
    ReplayScript {
        model: "generator".into(),
        turns: vec![ReplayTurn {
            text: text.to_string(),
            tool_calls: Vec::new(),
            usage: None,
            prompt_hash: None,
        }],
    }
}

const BROKEN_GREET: &str = "Here is the change.\n```diff\ndiff --git a/src/Main.kt b/src/Main.kt\n--- a/src/Main.kt\n+++ b/src/Main.kt\n@@ -1,3 +1,4 @@\n fun main() {\n     println(\"hi\")\n+    BROKEN greet()\n }\n```\n";
const GOOD_GREET: &str = "```diff\ndiff --git a/src/Main.kt b/src/Main.kt\n--- a/src/Main.kt\n+++ b/src/Main.kt\n@@ -1,3 +1,4 @@\n fun main() {\n     println(\"hi\")\n+    println(\"hey\")\n }\n```\n";
const STALE_PATCH: &str = "```diff\ndiff --git a/src/Main.kt b/src/Main.kt\n--- a/src/Main.kt\n+++ b/src/Main.kt\n@@ -1,3 +1,4 @@\n fun start() {\n     println(\"nope\")\n+    BROKEN\n }\n```\n";

/// Seven repositories covering the three curation methods, including the
/// skip paths of each.
pub fn build_git_suite(root: &Path) -> GitSuite {
    let mut jobs = Vec::new();

    // 1. A PR with two failing intermediate commits and a fixed head.
    let r = base(&root.join("human-multi"));
    r.commit("initial");
    r.write("src/Feature.kt", "fun feature() = BROKEN\n");
    let c1 = r.commit("start feature");
    r.write("src/Feature.kt", "fun feature() = BROKEN + 1\n");
    let c2 = r.commit("wip");
    r.write("src/Feature.kt", "fun feature() = 1\n");
    let c3 = r.commit("finish feature");
    jobs.push(Job::Human {
        repo: r.url(),
        forge: LocalForge {
            prs: vec![PullRequest { number: 7, merged: true, commits: vec![c1, c2, c3] }],
        },
    });

    // 2. One good PR, one whose head is broken, one unmerged, one all-green.
    let r = base(&root.join("human-mixed"));
    r.commit("initial");
    r.write("src/A.kt", "val a = BROKEN\n");
    let a1 = r.commit("a: draft");
    r.write("src/A.kt", "val a = 1\n");
    let a2 = r.commit("a: done");
    r.write("src/B.kt", "val b = BROKEN\n");
    let b1 = r.commit("b: never fixed");
    r.write("src/B.kt", "val b = 2\n");
    let c1 = r.commit("c: builds");
    r.write("src/C.kt", "val c = 3\n");
    let c2 = r.commit("c: still builds");
    jobs.push(Job::Human {
        repo: r.url(),
        forge: LocalForge {
            prs: vec![
                PullRequest { number: 1, merged: true, commits: vec![a1, a2] },
                PullRequest { number: 2, merged: true, commits: vec![b1.clone(), b1.clone()] },
                PullRequest { number: 3, merged: false, commits: vec![b1, c1.clone()] },
                PullRequest { number: 4, merged: true, commits: vec![c1, c2] },
            ],
        },
    });

    // 3. A dependency bump the code relies on, in build.gradle.
    let r = base(&root.join("dep-gradle"));
    r.commit("initial");
    r.write("build.gradle", BUILD_GRADLE_V2);
    r.write("src/Main.kt", "fun main() {\n    newApi()\n}\n");
    let bump = r.commit("use lib 2 newApi");
    r.write("README.md", "docs\n");
    let docs = r.commit("docs only");
    jobs.push(Job::Dep { repo: r.url(), commits: vec![bump, docs] });

    // 4. A version-catalog bump that is needed, plus one that is not.
    let r = base(&root.join("dep-catalog"));
    r.write("gradle/libs.versions.toml", "[versions]\nlib = \"1.0\"\n");
    r.commit("initial");
    r.write("gradle/libs.versions.toml", "[versions]\nlib = \"2.0\"\n");
    r.write("src/Main.kt", "fun main() {\n    newApi()\n}\n");
    let needed = r.commit("catalog: lib 2");
    r.write("settings.gradle", "rootProject.name = 'fixture-renamed'\n");
    let cosmetic = r.commit("rename project");
    jobs.push(Job::Dep { repo: r.url(), commits: vec![needed, cosmetic] });

    // 5. Release notes from an annotated tag; one breaking generation, one
    //    that builds.
    let r = base(&root.join("llm-tagged"));
    r.commit("initial");
    r.tag("v1.0", "First release\n\n- greeting support");
    r.write("src/Main.kt", "fun main() {\n    println(\"hi\")\n    println(\"hey\")\n}\n");
    let greet = r.commit("print a second greeting");
    r.tag("v1.1", "Second greeting");
    jobs.push(Job::Llm {
        repo: r.url(),
        commits: vec![(greet.clone(), reply(BROKEN_GREET)), (greet, reply(GOOD_GREET))],
    });

    // 6. A changelog file instead of tags, and a repo without any notes;
    //    replies without a diff or with a stale one count as failures.
    let r = base(&root.join("llm-changelog"));
    r.commit("initial");
    r.write("CHANGELOG.md", "## 1.1\n- greeting\n");
    r.write("src/Main.kt", "fun main() {\n    println(\"hi\")\n    println(\"hey\")\n}\n");
    let c = r.commit("greeting with changelog");
    jobs.push(Job::Llm {
        repo: r.url(),
        commits: vec![
            (c.clone(), reply(BROKEN_GREET)),
            (c.clone(), reply("I could not produce a change.")),
            (c, reply(STALE_PATCH)),
        ],
    });

    let r = base(&root.join("llm-bare"));
    r.commit("initial");
    r.write("src/Main.kt", "fun main() {\n    println(\"hi\")\n    println(\"hey\")\n}\n");
    let c = r.commit("greeting without notes");
    jobs.push(Job::Llm { repo: r.url(), commits: vec![(c, reply(BROKEN_GREET))] });

    GitSuite { jobs, repos: 7 }
}

/// (failing tree fails to build, failing tree plus solution builds)
pub fn verify_instance(sandbox: &Sandbox, inst: &ProblemInstance) -> (bool, bool) {
    let mut ws = sandbox.prepare("check-failing", &inst.checkout()).unwrap();
    let (_, failing) = sandbox.clean_build(&mut ws);
    ws.destroy().unwrap();

    let mut ws = sandbox.prepare("check-solution", &inst.checkout()).unwrap();
    let applied = inst
        .solution
        .diff
        .as_deref()
        .map(|d| Git::apply_patch(ws.root(), d, false).is_ok())
        .unwrap_or(false);
    let solved = applied && sandbox.clean_build(&mut ws).1.status == BuildStatus::Success;
    ws.destroy().unwrap();
    (failing.status == BuildStatus::Failure, solved)
}

/// Replays a script and keeps every prompt it was sent.
pub struct RecordingDriver {
    pub inner: buildbench::llm::ReplayDriver,
    pub prompts: Vec<String>,
}

impl buildbench::llm::ModelDriver for RecordingDriver {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn chat(
        &mut self,
        req: &buildbench::llm::ModelRequest,
    ) -> Result<buildbench::llm::ModelResponse, buildbench::llm::LlmError> {
        self.prompts
            .push(req.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n"));
        self.inner.chat(req)
    }
}

pub struct SuiteRun {
    pub instances: Vec<ProblemInstance>,
    pub log: buildbench::benchmark::CurationLog,
    pub prompts: Vec<String>,
}

/// Runs every job of the suite with `sandbox`.
pub fn run_git_suite(suite: &GitSuite, sandbox: &Sandbox) -> SuiteRun {
    use buildbench::benchmark::Curator;
    use buildbench::llm::{ReplayDriver, RetryPolicy};
    let mut log = Default::default();
    let mut instances = Vec::new();
    let mut prompts = Vec::new();
    for job in &suite.jobs {
        match job {
            Job::Human { repo, forge } => {
                instances.extend(Curator::new(repo.clone(), sandbox).curate_all_human(forge, &mut log).unwrap());
            }
            Job::Dep { repo, commits } => {
                let c = Curator::new(repo.clone(), sandbox);
                for commit in commits {
                    instances.extend(c.curate_dependency_augmented(commit, &mut log).unwrap());
                }
            }
            Job::Llm { repo, commits } => {
                let c = Curator::new(repo.clone(), sandbox);
                for (commit, script) in commits {
                    let mut d = RecordingDriver {
                        inner: ReplayDriver::new(script.clone()),
                        prompts: Vec::new(),
                    };
                    let retry = RetryPolicy { attempts: 1, initial_backoff_ms: 0 };
                    instances.extend(c.curate_llm_generated(commit, &mut d, retry, &mut log).unwrap());
                    prompts.extend(d.prompts);
                }
            }
        }
    }
    SuiteRun { instances, log, prompts }
}
