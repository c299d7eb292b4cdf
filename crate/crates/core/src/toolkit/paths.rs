//! Confinement of model-supplied paths to the workspace root.

use std::path::{Component, Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathError {
    /// The path resolves (lexically or through a symlink) outside the root.
    Outside(String),
    Invalid(String),
}

impl std::fmt::Display for PathError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PathError::Outside(p) => write!(f, "path `{p}` is outside workspace"),
            PathError::Invalid(p) => write!(f, "invalid path `{p}`"),
        }
    }
}

/// Resolves `input` against the canonical workspace `root`.
///
/// Relative paths are joined to the root; absolute paths must already lie
/// under it. `..` may not climb above the root, and the deepest existing
/// ancestor of the result is canonicalized so a symlink cannot point out of
/// the workspace. Existing paths come back canonicalized.
pub fn resolve_in_workspace(root: &Path, input: &str) -> Result<PathBuf, PathError> {
    if input.contains('\0') {
        return Err(PathError::Invalid(input.escape_default().to_string()));
    }
    let raw = Path::new(if input.trim().is_empty() { "." } else { input });

    let relative: PathBuf = if raw.is_absolute() {
        let lexical = normalize_absolute(raw);
        match lexical.strip_prefix(root) {
            Ok(rel) => rel.to_path_buf(),
            Err(_) => {
                // Accept absolute spellings that only differ by symlinked
                // ancestors of the root, e.g. /tmp vs /private/tmp.
                let canon = raw
                    .canonicalize()
                    .map_err(|_| PathError::Outside(input.to_string()))?;
                canon
                    .strip_prefix(root)
                    .map_err(|_| PathError::Outside(input.to_string()))?
                    .to_path_buf()
            }
        }
    } else {
        raw.to_path_buf()
    };

    let mut normalized = PathBuf::new();
    for comp in relative.components() {
        match comp {
            Component::CurDir => {}
            Component::Normal(part) => normalized.push(part),
            Component::ParentDir => {
                if !normalized.pop() {
                    return Err(PathError::Outside(input.to_string()));
                }
            }
            Component::RootDir | Component::Prefix(_) => {
                return Err(PathError::Invalid(input.to_string()))
            }
        }
    }
    let candidate = root.join(&normalized);

    // Find the deepest ancestor that exists and make sure its real location
    // is still inside the root.
    let mut existing = candidate.as_path();
    let mut missing_tail = Vec::new();
    loop {
        if existing.symlink_metadata().is_ok() {
            break;
        }
        match (existing.parent(), existing.file_name()) {
            (Some(parent), Some(name)) => {
                missing_tail.push(name.to_owned());
                existing = parent;
            }
            _ => return Err(PathError::Outside(input.to_string())),
        }
    }
    let real = existing
        .canonicalize()
        .map_err(|_| PathError::Outside(input.to_string()))?;
    if !real.starts_with(root) {
        return Err(PathError::Outside(input.to_string()));
    }
    let mut resolved = real;
    for name in missing_tail.into_iter().rev() {
        resolved.push(name);
    }
    Ok(resolved)
}

fn normalize_absolute(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for comp in path.components() {
        match comp {
            Component::ParentDir => {
                out.pop();
            }
            Component::CurDir => {}
            other => out.push(other.as_os_str()),
        }
    }
    out
}

/// Root-relative display form of a resolved path.
pub fn display_relative(root: &Path, path: &Path) -> String {
    match path.strip_prefix(root) {
        Ok(rel) if rel.as_os_str().is_empty() => ".".to_string(),
        Ok(rel) => rel.to_string_lossy().into_owned(),
        Err(_) => path.to_string_lossy().into_owned(),
    }
}
