//! Deterministic replay cases: a snapshot repository, scripted build rules,
//! a scripted model and the trajectory the episode is expected to produce.
//!
//! A fixture directory holds:
//!
//! | file | contents |
//! |------|----------|
//! | `problem.json` | the [`ProblemInstance`]; a snapshot path is relative to the directory |
//! | `config.json` | the [`AgentConfig`] |
//! | `fixture.json` | [`ScriptedFixture`] build rules |
//! | `replay.json` | the [`ReplayScript`] |
//! | `search.json` | optional canned search answers, query to text |
//! | `expected.jsonl` | normalized golden trajectory |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{diff_jsonl, run_episode, AgentConfig, EpisodeEnv, Trajectory};
use crate::benchmark::{ProblemInstance, RepoRef};
use crate::eval::{ConfigEntry, DriverFactory, EpisodeSetup, EvalError};
use crate::git::digest_tree;
use crate::llm::{ModelDriver, ReplayDriver, ReplayScript, RetryPolicy};
use crate::sandbox::{Sandbox, SandboxConfig, ScriptedBackend, ScriptedFixture};
use crate::toolkit::{FixtureSearch, SearchBackend};

pub const EXPECTED_FILE: &str = "expected.jsonl";

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("no fixtures under {0}")]
    Empty(PathBuf),
}

fn read(dir: &Path, name: &str) -> Result<String, FixtureError> {
    let path = dir.join(name);
    fs::read_to_string(&path).map_err(|e| FixtureError::File {
        path,
        message: e.to_string(),
    })
}

fn parse<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> Result<T, FixtureError> {
    serde_json::from_str(&read(dir, name)?).map_err(|e| FixtureError::File {
        path: dir.join(name),
        message: e.to_string(),
    })
}

/// One loaded replay case.
#[derive(Debug, Clone)]
pub struct ReplayFixture {
    pub dir: PathBuf,
    pub name: String,
    pub problem: ProblemInstance,
    pub config: AgentConfig,
    pub script: Arc<ReplayScript>,
    pub rules: ScriptedFixture,
    pub search: FixtureSearch,
    /// Digest over every input file and the snapshot tree.
    pub hash: String,
}

impl ReplayFixture {
    pub fn load(dir: &Path) -> Result<Self, FixtureError> {
        let dir = dir.canonicalize().map_err(|e| FixtureError::File {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut problem: ProblemInstance = parse(&dir, "problem.json")?;
        if let RepoRef::Snapshot { path } = &mut problem.repo {
            if path.is_relative() {
                *path = dir.join(&*path);
            }
        }
        let config: AgentConfig = parse(&dir, "config.json")?;
        let script = ReplayScript::load(&dir.join("replay.json")).map_err(|e| FixtureError::File {
            path: dir.join("replay.json"),
            message: e.to_string(),
        })?;
        let rules = ScriptedFixture::load(&dir.join("fixture.json")).map_err(|e| FixtureError::File {
            path: dir.join("fixture.json"),
            message: e.to_string(),
        })?;
        let answers: BTreeMap<String, String> = if dir.join("search.json").exists() {
            parse(&dir, "search.json")?
        } else {
            BTreeMap::new()
        };

        let mut h = Sha256::new();
        for f in ["problem.json", "config.json", "fixture.json", "replay.json", "search.json"] {
            if let Ok(bytes) = fs::read(dir.join(f)) {
                h.update(f.as_bytes());
                h.update([0]);
                h.update(&bytes);
            }
        }
        if let RepoRef::Snapshot { path } = &problem.repo {
            let d = digest_tree(path).map_err(|e| FixtureError::File {
                path: path.clone(),
                message: e.to_string(),
            })?;
            h.update(d.as_bytes());
        }
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(ReplayFixture {
            name,
            problem,
            config,
            script: Arc::new(script),
            rules,
            search: FixtureSearch::new(answers),
            hash: hex::encode(h.finalize()),
            dir,
        })
    }

    pub fn sandbox(&self, work_root: Option<&Path>) -> Sandbox {
        Sandbox::new(
            Arc::new(ScriptedBackend::new(self.rules.clone())),
            SandboxConfig {
                work_root: work_root.map(Path::to_path_buf),
                ..SandboxConfig::default()
            },
        )
    }

    pub fn driver(&self) -> ReplayDriver {
        ReplayDriver::shared(self.script.clone())
    }

    /// Runs the episode (attempt 0).
    pub fn run(&self) -> Trajectory {
        let sandbox = self.sandbox(None);
        let env = EpisodeEnv {
            sandbox: &sandbox,
            search: &self.search,
            limits: Default::default(),
            retry: RetryPolicy {
                initial_backoff_ms: 0,
                ..RetryPolicy::default()
            },
            fixture_hash: Some(self.hash.clone()),
        };
        let mut driver = self.driver();
        run_episode(&self.problem, &self.config, &env, &mut driver, 0)
    }

    pub fn expected(&self) -> Option<String> {
        fs::read_to_string(self.dir.join(EXPECTED_FILE)).ok()
    }

    /// Line diff of the normalized trajectory against the golden file; a
    /// missing golden file counts as empty.
    pub fn check(&self, t: &Trajectory) -> Vec<String> {
        diff_jsonl(&self.expected().unwrap_or_default(), &t.to_normalized_jsonl())
    }

    pub fn write_expected(&self, t: &Trajectory) -> std::io::Result<()> {
        fs::write(self.dir.join(EXPECTED_FILE), t.to_normalized_jsonl())
    }
}

/// Every fixture directory below `root`, keyed by (problem id, preset).
#[derive(Debug, Clone)]
pub struct FixtureSuite {
    pub fixtures: Vec<ReplayFixture>,
    sandboxes: BTreeMap<(String, String), Sandbox>,
}

fn key(problem: &str, label: &str) -> (String, String) {
    (problem.to_string(), label.to_string())
}

impl FixtureSuite {
    /// Loads `root` itself if it is a fixture, else each child directory that is one.
    pub fn load(root: &Path) -> Result<Self, FixtureError> {
        let mut fixtures = Vec::new();
        if root.join("replay.json").is_file() {
            fixtures.push(ReplayFixture::load(root)?);
        } else {
            let mut dirs: Vec<PathBuf> = fs::read_dir(root)
                .map_err(|e| FixtureError::File {
                    path: root.to_path_buf(),
                    message: e.to_string(),
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.join("replay.json").is_file())
                .collect();
            dirs.sort();
            for d in dirs {
                fixtures.push(ReplayFixture::load(&d)?);
            }
        }
        if fixtures.is_empty() {
            return Err(FixtureError::Empty(root.to_path_buf()));
        }
        let sandboxes = fixtures
            .iter()
            .map(|f| (key(&f.problem.id, f.config.preset.as_str()), f.sandbox(None)))
            .collect();
        Ok(FixtureSuite { fixtures, sandboxes })
    }

    pub fn find(&self, problem: &str, label: &str) -> Option<&ReplayFixture> {
        self.fixtures
            .iter()
            .find(|f| f.problem.id == problem && f.config.preset.as_str() == label)
    }

    /// Distinct problems, in fixture order.
    pub fn problems(&self) -> Vec<ProblemInstance> {
        let mut out: Vec<ProblemInstance> = Vec::new();
        for f in &self.fixtures {
            if !out.iter().any(|p| p.id == f.problem.id) {
                out.push(f.problem.clone());
            }
        }
        out
    }

    /// Configs labelled by preset, one per distinct preset.
    pub fn configs(&self) -> Vec<ConfigEntry> {
        let mut out: Vec<ConfigEntry> = Vec::new();
        for f in &self.fixtures {
            if !out.iter().any(|c| c.label == f.config.preset.as_str()) {
                out.push(ConfigEntry {
                    label: f.config.preset.as_str().to_string(),
                    config: f.config.clone(),
                });
            }
        }
        out
    }

    fn missing(problem: &ProblemInstance, config: &ConfigEntry) -> EvalError {
        EvalError::Driver(format!("no replay fixture for {} under {}", problem.id, config.label))
    }
}

impl EpisodeSetup for FixtureSuite {
    fn sandbox(&self, problem: &ProblemInstance, config: &ConfigEntry) -> Result<Sandbox, EvalError> {
        self.sandboxes
            .get(&key(&problem.id, &config.label))
            .cloned()
            .ok_or_else(|| Self::missing(problem, config))
    }

    fn search(&self, problem: &ProblemInstance, config: &ConfigEntry) -> &dyn SearchBackend {
        match self.find(&problem.id, &config.label) {
            Some(f) => &f.search,
            None => &crate::toolkit::OfflineSearch,
        }
    }

    fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            initial_backoff_ms: 0,
            ..RetryPolicy::default()
        }
    }

    fn fixture_hash(&self, problem: &ProblemInstance, config: &ConfigEntry) -> Option<String> {
        self.find(&problem.id, &config.label).map(|f| f.hash.clone())
    }

    fn covers(&self, problem: &ProblemInstance, config: &ConfigEntry) -> bool {
        self.find(&problem.id, &config.label).is_some()
    }
}

impl DriverFactory for FixtureSuite {
    fn driver(
        &self,
        problem: &ProblemInstance,
        config: &ConfigEntry,
        _attempt: u32,
    ) -> Result<Box<dyn ModelDriver>, EvalError> {
        let f = self.find(&problem.id, &config.label).ok_or_else(|| Self::missing(problem, config))?;
        Ok(Box::new(f.driver()))
    }
}
