use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    change_stats_from_diff, is_build_related_file, BenchmarkError, CurationMethod, ProblemInstance, RepoRef,
    SolutionRef, VerifiedBuilds,
};
use crate::agent::extract_unified_diff;
use crate::git::{digest_tree, Git};
use crate::llm::{chat_completion, Message, ModelDriver, ModelRequest, RetryPolicy};
use crate::sandbox::{BuildOutcome, BuildStatus, Checkout, Sandbox, Workspace};
use crate::triage::classify_root_cause;

pub const GENERATION_PROMPT: &str = include_str!("../../assets/generation_prompt.md");

/// Files searched at the commit when the nearest tag carries no notes.
pub const CHANGELOG_FILES: [&str; 5] = ["CHANGELOG.md", "CHANGELOG", "CHANGES.md", "RELEASE_NOTES.md", "NEWS.md"];

/// A merged pull request as recorded by the forge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequest {
    pub number: u64,
    #[serde(default = "yes")]
    pub merged: bool,
    /// Commits in order; the last one is the PR head.
    pub commits: Vec<String>,
}

fn yes() -> bool {
    true
}

/// Source of pull-request metadata.
pub trait ForgeClient {
    fn pull_requests(&self) -> Result<Vec<PullRequest>, BenchmarkError>;
}

/// Forge metadata read from a local JSON file: `{"prs": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalForge {
    pub prs: Vec<PullRequest>,
}

impl LocalForge {
    pub fn from_json(text: &str) -> Result<Self, BenchmarkError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, BenchmarkError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl ForgeClient for LocalForge {
    fn pull_requests(&self) -> Result<Vec<PullRequest>, BenchmarkError> {
        Ok(self.prs.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub subject: String,
    pub reason: String,
}

/// What a curation run emitted, skipped and failed to generate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationLog {
    pub emitted: u64,
    pub skipped: Vec<Skip>,
    pub generation_failures: u64,
}

impl CurationLog {
    fn skip(&mut self, subject: impl Into<String>, reason: impl Into<String>) {
        let skip = Skip {
            subject: subject.into(),
            reason: reason.into(),
        };
        tracing::info!(subject = %skip.subject, reason = %skip.reason, "skipped");
        self.skipped.push(skip);
    }
}

/// A repository plus the sandbox its builds are verified in.
pub struct Curator<'a> {
    pub repo: String,
    pub sandbox: &'a Sandbox,
}

fn short(commit: &str) -> &str {
    &commit[..commit.len().min(10)]
}

fn repo_name(url: &str) -> String {
    let last = url.trim_end_matches('/').rsplit(['/', '\\']).next().unwrap_or(url);
    let name = last.trim_end_matches(".git");
    if name.is_empty() { "repo".into() } else { name.into() }
}

impl<'a> Curator<'a> {
    pub fn new(repo: impl Into<String>, sandbox: &'a Sandbox) -> Self {
        Curator {
            repo: repo.into(),
            sandbox,
        }
    }

    fn git(&self) -> Git {
        Git::open(&self.repo)
    }

    fn checkout(&self, commit: &str, patch: Option<&str>) -> Checkout {
        Checkout::Git {
            url: self.repo.clone(),
            commit: commit.to_string(),
            patch: patch.map(String::from),
        }
    }

    fn prepare(&self, label: &str, commit: &str, patch: Option<&str>) -> Result<Workspace, BenchmarkError> {
        Ok(self.sandbox.prepare(label, &self.checkout(commit, patch))?)
    }

    /// Clean build of a fresh checkout.
    pub fn verify_build(&self, commit: &str, patch: Option<&str>) -> Result<BuildOutcome, BenchmarkError> {
        let mut ws = self.prepare(&format!("verify-{}", short(commit)), commit, patch)?;
        let (_, build) = self.sandbox.clean_build(&mut ws);
        ws.destroy()?;
        Ok(build)
    }

    fn instance(
        &self,
        id: String,
        failing_commit: &str,
        failing_patch: Option<String>,
        solution: SolutionRef,
        method: CurationMethod,
        introducing_diff: &str,
        log: &str,
    ) -> ProblemInstance {
        ProblemInstance {
            id,
            repo: RepoRef::Git { url: self.repo.clone() },
            failing_commit: failing_commit.to_string(),
            failing_patch,
            solution,
            method,
            category: Some(classify_root_cause(log)),
            note: None,
            error_log: log.to_string(),
            change_stats: change_stats_from_diff(introducing_diff),
            verified: VerifiedBuilds {
                failing_build_fails: true,
                solution_builds: true,
            },
        }
    }

    /// One instance per intermediate commit of a merged PR whose build fails;
    /// the solution is the change from that commit to the PR head.
    pub fn curate_human_committed(
        &self,
        pr: &PullRequest,
        log: &mut CurationLog,
    ) -> Result<Vec<ProblemInstance>, BenchmarkError> {
        let subject = format!("pr#{}", pr.number);
        if !pr.merged {
            log.skip(subject, "not merged");
            return Ok(Vec::new());
        }
        let Some((head, intermediate)) = pr.commits.split_last() else {
            log.skip(subject, "no commits");
            return Ok(Vec::new());
        };
        let git = self.git();
        let head = git.rev_parse(head)?;
        let head_build = self.verify_build(&head, None)?;
        if head_build.status != BuildStatus::Success {
            log.skip(subject, format!("head {} does not build ({:?})", short(&head), head_build.status));
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for commit in intermediate {
            let commit = git.rev_parse(commit)?;
            let build = self.verify_build(&commit, None)?;
            match build.status {
                BuildStatus::Success => continue,
                BuildStatus::Failure => {}
                other => {
                    log.skip(format!("{subject}@{}", short(&commit)), format!("build inconclusive ({other:?})"));
                    continue;
                }
            }
            let introducing = match git.parent(&commit)? {
                Some(parent) => git.diff(&parent, &commit, &[])?,
                None => String::new(),
            };
            let solution = SolutionRef {
                commit: Some(head.clone()),
                diff: Some(git.diff(&commit, &head, &[])?),
            };
            out.push(self.instance(
                format!("{}-pr{}-{}", repo_name(&self.repo), pr.number, short(&commit)),
                &commit,
                None,
                solution,
                CurationMethod::HumanCommitted,
                &introducing,
                &build.log,
            ));
        }
        log.emitted += out.len() as u64;
        Ok(out)
    }

    /// Every merged PR of `forge`.
    pub fn curate_all_human(
        &self,
        forge: &dyn ForgeClient,
        log: &mut CurationLog,
    ) -> Result<Vec<ProblemInstance>, BenchmarkError> {
        let mut out = Vec::new();
        for pr in forge.pull_requests()? {
            out.extend(self.curate_human_committed(&pr, log)?);
        }
        Ok(out)
    }

    /// Reverts the build-file part of a successful commit; emits an instance
    /// when the reverted tree no longer builds.
    pub fn curate_dependency_augmented(
        &self,
        commit: &str,
        log: &mut CurationLog,
    ) -> Result<Option<ProblemInstance>, BenchmarkError> {
        let git = self.git();
        let commit = git.rev_parse(commit)?;
        let subject = format!("dep@{}", short(&commit));
        let Some(parent) = git.parent(&commit)? else {
            log.skip(subject, "root commit");
            return Ok(None);
        };
        let files: Vec<String> = git
            .changed_files(&parent, &commit)?
            .into_iter()
            .filter(|f| is_build_related_file(f))
            .collect();
        if files.is_empty() {
            log.skip(subject, "no build-related files changed");
            return Ok(None);
        }
        let head_build = self.verify_build(&commit, None)?;
        if head_build.status != BuildStatus::Success {
            log.skip(subject, format!("commit does not build ({:?})", head_build.status));
            return Ok(None);
        }
        let forward = git.diff(&parent, &commit, &files)?;
        let inverse = git.diff(&commit, &parent, &files)?;

        let mut ws = self.prepare(&format!("dep-{}", short(&commit)), &commit, None)?;
        let original = digest_tree(ws.root())?;
        if let Err(e) = Git::apply_patch(ws.root(), &inverse, false) {
            ws.destroy()?;
            log.skip(subject, format!("inverse patch does not apply: {e}"));
            return Ok(None);
        }
        let (_, build) = self.sandbox.clean_build(&mut ws);
        let outcome = match build.status {
            BuildStatus::Success => {
                log.skip(subject, "reverted tree still builds");
                None
            }
            BuildStatus::Failure => {
                // The stored solution must take the failing tree back to the commit.
                let restored = Git::apply_patch(ws.root(), &forward, false).is_ok()
                    && digest_tree(ws.root())? == original;
                if restored {
                    let solution = SolutionRef {
                        commit: Some(commit.clone()),
                        diff: Some(forward),
                    };
                    Some(self.instance(
                        format!("{}-dep-{}", repo_name(&self.repo), short(&commit)),
                        &commit,
                        Some(inverse.clone()),
                        solution,
                        CurationMethod::DependencyAugmented,
                        &inverse,
                        &build.log,
                    ))
                } else {
                    log.skip(subject, "solution does not restore the original tree");
                    None
                }
            }
            other => {
                log.skip(subject, format!("build inconclusive ({other:?})"));
                None
            }
        };
        ws.destroy()?;
        log.emitted += outcome.is_some() as u64;
        Ok(outcome)
    }

    /// Release notes for `commit`: the nearest tag's annotation, else a
    /// changelog file at the commit. `None` when neither exists.
    pub fn release_notes(&self, commit: &str) -> Result<Option<String>, BenchmarkError> {
        let git = self.git();
        if let Some((tag, body)) = git.nearest_tag(commit)? {
            if !body.is_empty() {
                return Ok(Some(format!("{tag}\n{body}")));
            }
        }
        for f in CHANGELOG_FILES {
            if let Some(text) = git.show_file(commit, f)? {
                if !text.trim().is_empty() {
                    return Ok(Some(text));
                }
            }
        }
        Ok(None)
    }

    /// Asks a model to re-implement a successful commit on its parent; emits
    /// an instance when the generated change breaks the build.
    pub fn curate_llm_generated(
        &self,
        commit: &str,
        driver: &mut dyn ModelDriver,
        retry: RetryPolicy,
        log: &mut CurationLog,
    ) -> Result<Option<ProblemInstance>, BenchmarkError> {
        let git = self.git();
        let commit = git.rev_parse(commit)?;
        let subject = format!("llm@{}", short(&commit));
        let Some(parent) = git.parent(&commit)? else {
            log.skip(subject, "root commit");
            return Ok(None);
        };
        let head_build = self.verify_build(&commit, None)?;
        if head_build.status != BuildStatus::Success {
            log.skip(subject, format!("commit does not build ({:?})", head_build.status));
            return Ok(None);
        }
        let message = git.commit_message(&commit)?;
        let notes = self.release_notes(&commit)?;
        let prompt = GENERATION_PROMPT
            .replace("{commit_message}", &message)
            .replace("{release_notes}", notes.as_deref().unwrap_or("(none available)"));
        let req = ModelRequest {
            model: driver.model_id().to_string(),
            system_prompt: String::new(),
            messages: vec![Message::user(prompt)],
            tools: Vec::new(),
            temperature: crate::agent::DEFAULT_TEMPERATURE,
            max_output_tokens: None,
        };
        let reply = match chat_completion(driver, &req, retry) {
            Ok((resp, _)) => resp.text,
            Err(e) => {
                log.generation_failures += 1;
                log.skip(subject, format!("generation failed: {e}"));
                return Ok(None);
            }
        };
        let Some(patch) = extract_unified_diff(&reply) else {
            log.generation_failures += 1;
            log.skip(subject, "no patch in the model reply");
            return Ok(None);
        };
        let mut ws = self.prepare(&format!("llm-{}", short(&commit)), &parent, None)?;
        if let Err(e) = Git::apply_patch(ws.root(), &patch, false) {
            ws.destroy()?;
            log.generation_failures += 1;
            log.skip(subject, format!("generated patch does not apply: {e}"));
            return Ok(None);
        }
        let (_, build) = self.sandbox.clean_build(&mut ws);
        let outcome = match build.status {
            BuildStatus::Success => {
                log.skip(subject, "generated change builds");
                None
            }
            BuildStatus::Failure => {
                let wgit = Git::open(ws.root());
                wgit.run(&["add", "-A"])?;
                let to_solution = wgit.run(&["diff", "--cached", "--no-color", "--binary", "-M", "-R", &commit])?;
                let mut inst = self.instance(
                    format!("{}-llm-{}", repo_name(&self.repo), short(&commit)),
                    &parent,
                    Some(patch.clone()),
                    SolutionRef {
                        commit: Some(commit.clone()),
                        diff: Some(to_solution),
                    },
                    CurationMethod::LlmGenerated,
                    &patch,
                    &build.log,
                );
                if notes.is_none() {
                    inst.note = Some("release notes unavailable; generated from the commit message only".into());
                }
                Some(inst)
            }
            other => {
                log.skip(subject, format!("build inconclusive ({other:?})"));
                None
            }
        };
        ws.destroy()?;
        log.emitted += outcome.is_some() as u64;
        Ok(outcome)
    }
}

/// Applies an instance's stored solution to its failing tree and returns
/// the digest of the result.
pub fn solution_tree_digest(sandbox: &Sandbox, inst: &ProblemInstance) -> Result<String, BenchmarkError> {
    let mut ws = sandbox.prepare(&format!("solve-{}", inst.id), &inst.checkout())?;
    if let Some(diff) = &inst.solution.diff {
        Git::apply_patch(ws.root(), diff, false)?;
    }
    let d = digest_tree(ws.root())?;
    ws.destroy()?;
    Ok(d)
}

/// Digest of `commit`'s tree as checked out.
pub fn commit_tree_digest(sandbox: &Sandbox, repo: &str, commit: &str) -> Result<String, BenchmarkError> {
    let mut ws = sandbox.prepare(
        &format!("tree-{}", short(commit)),
        &Checkout::Git {
            url: repo.to_string(),
            commit: commit.to_string(),
            patch: None,
        },
    )?;
    let d = digest_tree(ws.root())?;
    ws.destroy()?;
    Ok(d)
}
