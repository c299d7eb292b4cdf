use std::fs;
use std::io;
use std::path::Path;

use crate::text::truncate_tail;

pub const SYSTEM_PROMPT: &str = include_str!("../../assets/system_prompt.md");
pub const TOOL_USAGE_GUIDANCE: &str = include_str!("../../assets/tool_guidance.md");
pub const PATCH_INSTRUCTIONS: &str = include_str!("../../assets/patch_instructions.md");
pub const DELEGATE_PROMPT: &str = include_str!("../../assets/delegate_prompt.md");

pub const TREE_MAX_DEPTH: usize = 4;
pub const TREE_MAX_ENTRIES: usize = 400;

pub const PATH_HEADER: &str = "** Current project full path. **";
pub const TREE_HEADER: &str = "**Directory tree:**";
pub const ERROR_HEADER: &str = "** Current State (Build Error):**";
const RULE: &str = "===============================";

/// Indented listing of `root`, directories first, names in byte order.
///
/// Descends at most `max_depth` levels, lists at most `max_entries` entries
/// and skips `.git`.
pub fn directory_tree(root: &Path, max_depth: usize, max_entries: usize) -> io::Result<String> {
    let mut lines = Vec::new();
    let mut truncated = false;
    walk(root, 0, max_depth, max_entries, &mut lines, &mut truncated)?;
    if truncated {
        lines.push(format!("... (listing truncated at {max_entries} entries)"));
    }
    Ok(lines.join("\n"))
}

fn walk(
    dir: &Path,
    depth: usize,
    max_depth: usize,
    max_entries: usize,
    lines: &mut Vec<String>,
    truncated: &mut bool,
) -> io::Result<()> {
    if depth >= max_depth {
        return Ok(());
    }
    let mut dirs = Vec::new();
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == ".git" {
            continue;
        }
        if entry.file_type()?.is_dir() {
            dirs.push(name);
        } else {
            files.push(name);
        }
    }
    dirs.sort();
    files.sort();
    let indent = "  ".repeat(depth);
    for name in dirs {
        if lines.len() >= max_entries {
            *truncated = true;
            return Ok(());
        }
        lines.push(format!("{indent}{name}/"));
        walk(&dir.join(&name), depth + 1, max_depth, max_entries, lines, truncated)?;
        if *truncated {
            return Ok(());
        }
    }
    for name in files {
        if lines.len() >= max_entries {
            *truncated = true;
            return Ok(());
        }
        lines.push(format!("{indent}{name}"));
    }
    Ok(())
}

/// The first user message of an episode: project path, tree and the tail of
/// the build log.
pub fn build_initial_prompt(root: &Path, error_log: &str, log_budget: usize) -> io::Result<String> {
    let tree = directory_tree(root, TREE_MAX_DEPTH, TREE_MAX_ENTRIES)?;
    let log = truncate_tail(error_log, log_budget);
    Ok(format!(
        "{PATH_HEADER}\n{RULE}\n{}\n\n{TREE_HEADER}\n{RULE}\n{tree}\n\n{ERROR_HEADER}\n{RULE}\n{log}\n",
        root.display()
    ))
}

pub(crate) fn delegate_prompt(instructions: &str, files: &[String]) -> String {
    let files = if files.is_empty() {
        "(not specified)".to_string()
    } else {
        files.join("\n")
    };
    DELEGATE_PROMPT
        .replace("{instructions}", instructions)
        .replace("{files}", &files)
}

/// Pulls a unified diff out of a model reply.
///
/// Prefers the first ```diff (or ```patch) fence, then any fence whose body
/// looks like a diff, then raw text starting at `diff --git` or `--- `.
pub fn extract_unified_diff(reply: &str) -> Option<String> {
    let mut fences = Vec::new();
    let mut rest = reply;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let (lang, body_start) = match after.find('\n') {
            Some(nl) => (after[..nl].trim(), nl + 1),
            None => break,
        };
        let body = &after[body_start..];
        let Some(end) = body.find("```") else { break };
        fences.push((lang.to_string(), &body[..end]));
        rest = &body[end + 3..];
    }
    let looks_like_diff = |s: &str| s.contains("\n+++ ") || s.starts_with("diff --git") || s.starts_with("--- ");
    let pick = fences
        .iter()
        .find(|(lang, body)| matches!(lang.as_str(), "diff" | "patch") && looks_like_diff(body))
        .or_else(|| fences.iter().find(|(_, body)| looks_like_diff(body)))
        .map(|(_, body)| body.to_string())
        .or_else(|| {
            let idx = reply
                .find("diff --git")
                .or_else(|| reply.find("\n--- ").map(|i| i + 1))
                .or_else(|| reply.starts_with("--- ").then_some(0))?;
            Some(reply[idx..].to_string())
        })?;
    let mut patch = pick.trim_matches('\n').to_string();
    if patch.is_empty() {
        return None;
    }
    patch.push('\n');
    Some(patch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::TRUNCATION_MARKER;

    #[test]
    fn tree_orders_directories_first_and_skips_git() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir_all(root.join("app/src/main/java/deep")).unwrap();
        fs::create_dir_all(root.join(".git")).unwrap();
        fs::write(root.join("b.txt"), "").unwrap();
        fs::write(root.join("a.txt"), "").unwrap();
        fs::write(root.join("app/build.gradle"), "").unwrap();
        let tree = directory_tree(root, 4, 400).unwrap();
        assert_eq!(
            tree,
            "app/\n  src/\n    main/\n      java/\n  build.gradle\na.txt\nb.txt"
        );
    }

    #[test]
    fn tree_entry_cap() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..10 {
            fs::write(dir.path().join(format!("f{i}")), "").unwrap();
        }
        let tree = directory_tree(dir.path(), 4, 3).unwrap();
        assert_eq!(tree.lines().count(), 4);
        assert!(tree.ends_with("truncated at 3 entries)"));
    }

    #[test]
    fn prompt_sections_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let log = "x".repeat(100) + "TAIL";
        let p = build_initial_prompt(dir.path(), &log, 10).unwrap();
        let a = p.find(PATH_HEADER).unwrap();
        let b = p.find(TREE_HEADER).unwrap();
        let c = p.find(ERROR_HEADER).unwrap();
        assert!(a < b && b < c);
        assert!(p.ends_with(&format!("{TRUNCATION_MARKER}xxxxxxTAIL\n")));
    }

    #[test]
    fn diff_extraction() {
        let reply = "Here you go:\n```diff\ndiff --git a/x b/x\n--- a/x\n+++ b/x\n@@ -1 +1 @@\n-a\n+b\n```\nDone.";
        let d = extract_unified_diff(reply).unwrap();
        assert!(d.starts_with("diff --git a/x b/x\n"));
        assert!(d.ends_with("+b\n"));
        assert_eq!(extract_unified_diff("I could not find a fix."), None);
        let raw = "diff --git a/y b/y\n--- a/y\n+++ b/y\n@@ -1 +1 @@\n-1\n+2";
        assert_eq!(extract_unified_diff(raw).unwrap(), format!("{raw}\n"));
    }
}
