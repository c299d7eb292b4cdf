//! Thin wrapper over the `git` command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GitError {
    #[error("git {args}: {stderr}")]
    Command { args: String, stderr: String },
    #[error("failed to run git: {0}")]
    Io(#[from] std::io::Error),
}

/// A repository (or any directory) that git commands run in.
#[derive(Debug, Clone)]
pub struct Git {
    dir: PathBuf,
}

fn run_git(dir: Option<&Path>, args: &[&str], stdin: Option<&str>) -> Result<String, GitError> {
    run_git_env(dir, args, stdin, &[])
}

fn run_git_env(
    dir: Option<&Path>,
    args: &[&str],
    stdin: Option<&str>,
    env: &[(&str, &std::ffi::OsStr)],
) -> Result<String, GitError> {
    let mut cmd = Command::new("git");
    cmd.envs(env.iter().copied());
    if let Some(dir) = dir {
        cmd.current_dir(dir);
    }
    cmd.args(["-c", "core.quotepath=off", "-c", "advice.detachedHead=false"])
        .args(args)
        .env("GIT_TERMINAL_PROMPT", "0")
        .stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let mut child = cmd.spawn()?;
    if let Some(input) = stdin {
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(input.as_bytes())?;
    }
    let out = child.wait_with_output()?;
    if !out.status.success() {
        return Err(GitError::Command {
            args: args.join(" "),
            stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        });
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn apply(dir: &Path, patch: &str, reverse: bool, check_only: bool) -> Result<(), GitError> {
    let mut args = vec!["apply", "--whitespace=nowarn"];
    if check_only {
        args.push("--check");
    }
    if reverse {
        args.push("-R");
    }
    args.push("-");
    let ceiling = dir.parent().unwrap_or(dir).as_os_str();
    run_git_env(Some(dir), &args, Some(patch), &[("GIT_CEILING_DIRECTORIES", ceiling)]).map(|_| ())
}

impl Git {
    pub fn open(dir: impl Into<PathBuf>) -> Self {
        Git { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn run(&self, args: &[&str]) -> Result<String, GitError> {
        run_git(Some(&self.dir), args, None)
    }

    /// Clones `url` into `dest` and checks out `commit` detached.
    pub fn clone_detached(url: &str, commit: &str, dest: &Path) -> Result<Git, GitError> {
        let dest_str = dest.to_string_lossy();
        run_git(None, &["clone", "--quiet", "--no-checkout", url, &dest_str], None)?;
        let git = Git::open(dest);
        git.run(&["checkout", "--quiet", "--detach", commit])?;
        Ok(git)
    }

    /// Applies a unified diff to the working tree of `dir`.
    ///
    /// Works on plain directories too: repository discovery stops at `dir`,
    /// so an enclosing repository never changes how paths resolve.
    pub fn apply_patch(dir: &Path, patch: &str, reverse: bool) -> Result<(), GitError> {
        apply(dir, patch, reverse, false)
    }

    /// Checks whether a patch would apply without touching the tree.
    pub fn check_patch(dir: &Path, patch: &str, reverse: bool) -> Result<(), GitError> {
        apply(dir, patch, reverse, true)
    }

    pub fn rev_parse(&self, rev: &str) -> Result<String, GitError> {
        Ok(self.run(&["rev-parse", "--verify", &format!("{rev}^{{commit}}")])?.trim().to_string())
    }

    pub fn head(&self) -> Result<String, GitError> {
        self.rev_parse("HEAD")
    }

    /// First parent of `commit`, or `None` for a root commit.
    pub fn parent(&self, commit: &str) -> Result<Option<String>, GitError> {
        match self.rev_parse(&format!("{commit}^")) {
            Ok(p) => Ok(Some(p)),
            Err(GitError::Command { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Rename-aware, binary-safe diff from `from` to `to`,
    /// optionally restricted to `paths`.
    pub fn diff(&self, from: &str, to: &str, paths: &[String]) -> Result<String, GitError> {
        let mut args: Vec<&str> = vec!["diff", "--no-color", "--no-ext-diff", "--binary", "-M", from, to];
        if !paths.is_empty() {
            args.push("--");
            args.extend(paths.iter().map(String::as_str));
        }
        self.run(&args)
    }

    /// Paths touched between two commits (post-image names for renames).
    pub fn changed_files(&self, from: &str, to: &str) -> Result<Vec<String>, GitError> {
        let out = self.run(&["diff", "--name-only", "--no-renames", from, to])?;
        Ok(out.lines().filter(|l| !l.is_empty()).map(String::from).collect())
    }

    pub fn commit_message(&self, commit: &str) -> Result<String, GitError> {
        Ok(self.run(&["log", "-1", "--format=%B", commit])?.trim_end().to_string())
    }

    /// Nearest tag reachable from `commit`, with its annotation if any.
    pub fn nearest_tag(&self, commit: &str) -> Result<Option<(String, String)>, GitError> {
        let tag = match self.run(&["describe", "--tags", "--abbrev=0", commit]) {
            Ok(t) => t.trim().to_string(),
            Err(GitError::Command { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let body = self
            .run(&["tag", "-l", "--format=%(contents)", &tag])
            .unwrap_or_default();
        Ok(Some((tag, body.trim().to_string())))
    }

    /// Contents of `path` at `commit`, or `None` when absent.
    pub fn show_file(&self, commit: &str, path: &str) -> Result<Option<String>, GitError> {
        match self.run(&["show", &format!("{commit}:{path}")]) {
            Ok(s) => Ok(Some(s)),
            Err(GitError::Command { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// SHA-256 over every regular file and symlink below `dir` (sorted, `.git`
/// excluded). Equal digests mean byte-identical trees.
pub fn digest_tree(dir: &Path) -> std::io::Result<String> {
    let mut entries = Vec::new();
    for entry in walkdir::WalkDir::new(dir)
        .min_depth(1)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| e.file_name() != ".git")
    {
        let entry = entry.map_err(std::io::Error::other)?;
        if entry.file_type().is_dir() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(dir)
            .expect("walkdir yields children")
            .to_string_lossy()
            .into_owned();
        entries.push((rel, entry.path().to_path_buf(), entry.file_type().is_symlink()));
    }
    entries.sort();
    let mut hasher = Sha256::new();
    for (rel, path, is_link) in entries {
        hasher.update(rel.as_bytes());
        hasher.update([0]);
        if is_link {
            hasher.update(b"link:");
            hasher.update(std::fs::read_link(&path)?.to_string_lossy().as_bytes());
        } else {
            hasher.update(std::fs::read(&path)?);
        }
        hasher.update([0]);
    }
    Ok(hex::encode(hasher.finalize()))
}
