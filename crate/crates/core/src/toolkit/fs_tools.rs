use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use globset::{Glob, GlobBuilder, GlobSet, GlobSetBuilder};
use regex::Regex;

use super::paths::{display_relative, resolve_in_workspace, PathError};
use super::spec::{ToolCall, ToolErrorKind, ToolResult};
use super::ToolContext;

const BINARY_SNIFF: usize = 8000;

fn path_error(call: &ToolCall, err: PathError) -> ToolResult {
    match err {
        PathError::Outside(p) => ToolResult::error(
            call,
            ToolErrorKind::OutsideWorkspace,
            format!("path `{p}` is outside workspace"),
        ),
        PathError::Invalid(p) => {
            ToolResult::error(call, ToolErrorKind::InvalidArguments, format!("invalid path `{p}`"))
        }
    }
}

fn resolve(call: &ToolCall, ctx: &ToolContext<'_>, arg: &str) -> Result<PathBuf, ToolResult> {
    let input = call.str_arg(arg).unwrap_or(".");
    resolve_in_workspace(ctx.workspace.root(), input).map_err(|e| path_error(call, e))
}

fn looks_binary(bytes: &[u8]) -> bool {
    bytes[..bytes.len().min(BINARY_SNIFF)].contains(&0) || std::str::from_utf8(bytes).is_err()
}

/// Files below `dir`, skipping `.git` and never following symlinks.
fn walk_files(dir: &Path) -> impl Iterator<Item = walkdir::DirEntry> {
    walkdir::WalkDir::new(dir)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.file_name() != ".git")
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
}

fn glob_set(patterns: &[String], case_insensitive: bool) -> Result<GlobSet, String> {
    let mut builder = GlobSetBuilder::new();
    for p in patterns {
        let glob = GlobBuilder::new(p)
            .case_insensitive(case_insensitive)
            .literal_separator(false)
            .build()
            .map_err(|e| e.to_string())?;
        builder.add(glob);
    }
    builder.build().map_err(|e| e.to_string())
}

pub(super) fn list_directory(call: &ToolCall, ctx: &mut ToolContext<'_>) -> ToolResult {
    let dir = match resolve(call, ctx, "path") {
        Ok(p) => p,
        Err(r) => return r,
    };
    if !dir.is_dir() {
        return ToolResult::error(
            call,
            ToolErrorKind::NotFound,
            format!("not a directory: {}", call.str_arg("path").unwrap_or(".")),
        );
    }
    let ignore = match glob_set(&call.str_list_arg("ignore"), false) {
        Ok(set) => set,
        Err(e) => return ToolResult::error(call, ToolErrorKind::InvalidArguments, e),
    };
    let entries = match fs::read_dir(&dir) {
        Ok(rd) => rd,
        Err(e) => return ToolResult::error(call, ToolErrorKind::Io, e.to_string()),
    };
    let mut dirs = Vec::new();
    let mut files = Vec::new();
    for entry in entries.filter_map(Result::ok) {
        let name = entry.file_name().to_string_lossy().into_owned();
        if ignore.is_match(&name) {
            continue;
        }
        match entry.file_type() {
            Ok(ft) if ft.is_dir() => dirs.push(format!("{name}/")),
            _ => files.push(name),
        }
    }
    dirs.sort();
    files.sort();
    dirs.extend(files);
    if dirs.is_empty() {
        return ToolResult::ok(call, "(empty directory)");
    }
    ToolResult::ok(call, dirs.join("\n"))
}

pub(super) fn read_file(call: &ToolCall, ctx: &mut ToolContext<'_>) -> ToolResult {
    let path = match resolve(call, ctx, "path") {
        Ok(p) => p,
        Err(r) => return r,
    };
    let rel = display_relative(ctx.workspace.root(), &path);
    if path.is_dir() {
        return ToolResult::error(call, ToolErrorKind::InvalidArguments, format!("{rel} is a directory"));
    }
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return ToolResult::error(call, ToolErrorKind::NotFound, format!("file not found: {rel}"))
        }
        Err(e) => return ToolResult::error(call, ToolErrorKind::Io, e.to_string()),
    };
    if looks_binary(&bytes) {
        return ToolResult::ok(
            call,
            format!("[binary file: {rel}, {} bytes; content not shown]", bytes.len()),
        );
    }
    let text = String::from_utf8(bytes).expect("checked above");
    let offset = call.int_arg("offset").unwrap_or(0).max(0) as usize;
    let limit = call
        .int_arg("limit")
        .map(|l| l.max(0) as usize)
        .unwrap_or(ctx.limits.read_lines);
    let total = text.lines().count();
    if offset == 0 && total <= limit {
        return ToolResult::ok(call, text);
    }
    let window: Vec<&str> = text.lines().skip(offset).take(limit).collect();
    let end = offset + window.len();
    let mut payload = format!(
        "[showing lines {}-{} of {total}; use offset and limit to read more]\n",
        offset + 1,
        end
    );
    payload.push_str(&window.join("\n"));
    ToolResult::ok(call, payload)
}

pub(super) fn replace(call: &ToolCall, ctx: &mut ToolContext<'_>) -> ToolResult {
    let path = match resolve(call, ctx, "file_path") {
        Ok(p) => p,
        Err(r) => return r,
    };
    let rel = display_relative(ctx.workspace.root(), &path);
    let old = call.str_arg("old_string").unwrap_or_default();
    let new = call.str_arg("new_string").unwrap_or_default();
    let expected = call.int_arg("expected_replacements").unwrap_or(1);
    if expected < 1 {
        return ToolResult::error(
            call,
            ToolErrorKind::InvalidArguments,
            "expected_replacements must be at least 1",
        );
    }
    if old.is_empty() {
        return ToolResult::error(call, ToolErrorKind::InvalidArguments, "old_string is empty");
    }
    if old == new {
        return ToolResult::error(
            call,
            ToolErrorKind::InvalidArguments,
            "no-op replacement: old_string and new_string are identical",
        );
    }
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return ToolResult::error(call, ToolErrorKind::NotFound, format!("file not found: {rel}"))
        }
        Err(e) => return ToolResult::error(call, ToolErrorKind::Io, e.to_string()),
    };
    if looks_binary(&bytes) {
        return ToolResult::error(call, ToolErrorKind::InvalidArguments, format!("{rel} is not a text file"));
    }
    let content = String::from_utf8(bytes).expect("checked above");
    let found = content.matches(old).count();
    if found == 0 {
        return ToolResult::error(call, ToolErrorKind::NotFound, format!("old_string not found in {rel}"));
    }
    if found as i64 != expected {
        return ToolResult::error(
            call,
            ToolErrorKind::InvalidArguments,
            format!("expected {expected} replacements, found {found} occurrences of old_string in {rel}"),
        );
    }
    let updated = content.replacen(old, new, found);
    if let Err(e) = fs::write(&path, updated) {
        return ToolResult::error(call, ToolErrorKind::Io, e.to_string());
    }
    ToolResult::ok(call, format!("replaced {found} occurrence(s) in {rel}"))
}

pub(super) fn glob(call: &ToolCall, ctx: &mut ToolContext<'_>) -> ToolResult {
    let dir = match resolve(call, ctx, "path") {
        Ok(p) => p,
        Err(r) => return r,
    };
    if !dir.is_dir() {
        return ToolResult::error(call, ToolErrorKind::NotFound, "search path is not a directory");
    }
    let pattern = call.str_arg("pattern").unwrap_or_default();
    let case_sensitive = call.bool_arg("case_sensitive").unwrap_or(false);
    let matcher = match GlobBuilder::new(pattern)
        .case_insensitive(!case_sensitive)
        .literal_separator(true)
        .build()
    {
        Ok(g) => g.compile_matcher(),
        Err(e) => return ToolResult::error(call, ToolErrorKind::InvalidArguments, e.to_string()),
    };
    let root = ctx.workspace.root();
    let mut hits: Vec<(SystemTime, String)> = walk_files(&dir)
        .filter(|e| {
            e.path()
                .strip_prefix(&dir)
                .is_ok_and(|rel| matcher.is_match(rel))
        })
        .map(|e| {
            let mtime = e
                .metadata()
                .ok()
                .and_then(|m| m.modified().ok())
                .unwrap_or(SystemTime::UNIX_EPOCH);
            (mtime, display_relative(root, e.path()))
        })
        .collect();
    if hits.is_empty() {
        return ToolResult::ok(call, format!("No files found matching pattern \"{pattern}\""));
    }
    hits.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let lines: Vec<String> = hits.into_iter().map(|(_, p)| p).collect();
    ToolResult::ok(call, lines.join("\n"))
}

pub(super) fn search_file_content(call: &ToolCall, ctx: &mut ToolContext<'_>) -> ToolResult {
    let dir = match resolve(call, ctx, "path") {
        Ok(p) => p,
        Err(r) => return r,
    };
    let pattern = call.str_arg("pattern").unwrap_or_default();
    let re = match Regex::new(pattern) {
        Ok(r) => r,
        Err(e) => {
            return ToolResult::error(call, ToolErrorKind::InvalidArguments, format!("invalid regex: {e}"))
        }
    };
    let include = match call.str_arg("include") {
        Some(glob) => match Glob::new(glob) {
            Ok(g) => Some(g.compile_matcher()),
            Err(e) => return ToolResult::error(call, ToolErrorKind::InvalidArguments, e.to_string()),
        },
        None => None,
    };
    let root = ctx.workspace.root().to_path_buf();
    if !dir.exists() {
        let rel = display_relative(&root, &dir);
        return ToolResult::error(call, ToolErrorKind::NotFound, format!("path not found: {rel}"));
    }
    let files: Vec<PathBuf> = if dir.is_file() {
        vec![dir.clone()]
    } else {
        walk_files(&dir).map(|e| e.into_path()).collect()
    };
    let mut out = Vec::new();
    for path in files {
        if let Some(m) = &include {
            let rel = path.strip_prefix(&root).unwrap_or(&path);
            let name = path.file_name().map(Path::new).unwrap_or(rel);
            if !m.is_match(rel) && !m.is_match(name) {
                continue;
            }
        }
        let Ok(bytes) = fs::read(&path) else { continue };
        if looks_binary(&bytes) {
            continue;
        }
        let text = String::from_utf8_lossy(&bytes);
        let rel = display_relative(&root, &path);
        for (i, line) in text.lines().enumerate() {
            if re.is_match(line) {
                out.push(format!("{rel}:{}:{line}", i + 1));
            }
        }
    }
    if out.is_empty() {
        return ToolResult::ok(call, format!("No matches found for pattern \"{pattern}\""));
    }
    ToolResult::ok(call, out.join("\n"))
}
