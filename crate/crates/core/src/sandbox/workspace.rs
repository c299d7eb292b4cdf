use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use tempfile::TempDir;

use super::{Invocation, JdkRegistry, SandboxConfig, SandboxError};
use crate::git::Git;

static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

/// Where a workspace's files come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Checkout {
    /// A plain directory copied verbatim.
    Snapshot { path: PathBuf },
    /// A git repository checked out detached at `commit`, optionally with a
    /// unified diff applied on top.
    Git {
        url: String,
        commit: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        patch: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifecycle {
    Ready,
    Busy,
    Destroyed,
}

/// An isolated checkout plus the environment one episode's commands run in.
///
/// The backing directory is removed when the workspace is dropped.
#[derive(Debug)]
pub struct Workspace {
    id: String,
    root: PathBuf,
    env: BTreeMap<String, String>,
    base_path: String,
    jdks: JdkRegistry,
    java_version: u32,
    lifecycle: Lifecycle,
    log: Vec<Invocation>,
    dir: Option<TempDir>,
}

impl Workspace {
    pub(crate) fn materialize(
        label: &str,
        checkout: &Checkout,
        config: &SandboxConfig,
    ) -> Result<Workspace, SandboxError> {
        let n = NEXT_ID.fetch_add(1, Ordering::Relaxed);
        let prefix = format!("{}-{n}-", sanitize(label));
        let builder = {
            let mut b = tempfile::Builder::new();
            b.prefix(&prefix);
            b
        };
        let dir = match &config.work_root {
            Some(parent) => {
                fs::create_dir_all(parent)?;
                builder.tempdir_in(parent)?
            }
            None => builder.tempdir()?,
        };
        let root = dir.path().join("ws");
        match checkout {
            Checkout::Snapshot { path } => {
                if !path.is_dir() {
                    return Err(SandboxError::Prepare(format!(
                        "snapshot {} is not a directory",
                        path.display()
                    )));
                }
                copy_tree(path, &root)?;
            }
            Checkout::Git { url, commit, patch } => {
                Git::clone_detached(url, commit, &root)
                    .map_err(|e| SandboxError::Prepare(e.to_string()))?;
                if let Some(patch) = patch {
                    Git::apply_patch(&root, patch, false)
                        .map_err(|e| SandboxError::Prepare(e.to_string()))?;
                }
            }
        }
        let root = root.canonicalize()?;

        let base_path = std::env::var("PATH").unwrap_or_default();
        let mut ws = Workspace {
            id: format!("{}-{n}", sanitize(label)),
            root,
            env: BTreeMap::new(),
            base_path,
            jdks: config.jdks.clone(),
            java_version: config.jdks.default_version(),
            lifecycle: Lifecycle::Ready,
            log: Vec::new(),
            dir: Some(dir),
        };
        if let Some(sdk) = &config.android_sdk_root {
            ws.env
                .insert("ANDROID_SDK_ROOT".into(), sdk.display().to_string());
        }
        let default = ws.java_version;
        if ws.jdks.home(default).is_some() {
            ws.select_jdk(default);
        }
        Ok(ws)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Canonical absolute root of the checkout.
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn env(&self) -> &BTreeMap<String, String> {
        &self.env
    }

    pub fn lifecycle(&self) -> Lifecycle {
        self.lifecycle
    }

    pub(crate) fn set_lifecycle(&mut self, state: Lifecycle) {
        if self.lifecycle != Lifecycle::Destroyed {
            self.lifecycle = state;
        }
    }

    pub fn invocations(&self) -> &[Invocation] {
        &self.log
    }

    pub(crate) fn record(&mut self, inv: Invocation) {
        self.log.push(inv);
    }

    pub fn jdks(&self) -> &JdkRegistry {
        &self.jdks
    }

    pub fn java_version(&self) -> u32 {
        self.java_version
    }

    /// Points `JAVA_HOME` and the front of `PATH` at the given JDK.
    /// Returns the JDK home, or `None` when the version is not configured.
    pub fn select_jdk(&mut self, version: u32) -> Option<PathBuf> {
        let home = self.jdks.home(version)?.to_path_buf();
        self.java_version = version;
        self.env
            .insert("JAVA_HOME".into(), home.display().to_string());
        let path = if self.base_path.is_empty() {
            format!("{}/bin", home.display())
        } else {
            format!("{}/bin:{}", home.display(), self.base_path)
        };
        self.env.insert("PATH".into(), path);
        Some(home)
    }

    /// Removes the workspace directory now instead of on drop.
    pub fn destroy(&mut self) -> Result<(), SandboxError> {
        self.lifecycle = Lifecycle::Destroyed;
        if let Some(dir) = self.dir.take() {
            dir.close()?;
        }
        Ok(())
    }
}

fn sanitize(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .take(48)
        .collect();
    if s.is_empty() {
        "ws".into()
    } else {
        s
    }
}

/// Recursively copies `src` into `dst`, recreating symlinks as symlinks.
pub(crate) fn copy_tree(src: &Path, dst: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dst)?;
    for entry in walkdir::WalkDir::new(src).min_depth(1).follow_links(false) {
        let entry = entry.map_err(std::io::Error::other)?;
        let rel = entry.path().strip_prefix(src).expect("walkdir yields children");
        let target = dst.join(rel);
        let ft = entry.file_type();
        if ft.is_dir() {
            fs::create_dir_all(&target)?;
        } else if ft.is_symlink() {
            let link = fs::read_link(entry.path())?;
            std::os::unix::fs::symlink(link, &target)?;
        } else {
            fs::copy(entry.path(), &target)?;
        }
    }
    Ok(())
}
