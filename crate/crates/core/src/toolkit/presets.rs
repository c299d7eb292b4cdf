//! Tool declarations and the canonical toolsets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::spec::{ParamSpec, ParamType, ToolId, ToolSpec};
use super::ToolkitError;

fn param(name: &str, ty: ParamType, required: bool, description: &str) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        ty,
        required,
        description: description.into(),
    }
}

/// The declaration shown to the model for a built-in tool.
pub fn builtin_spec(id: ToolId) -> ToolSpec {
    use ParamType::*;
    let (description, parameters) = match id {
        ToolId::ListDirectory => (
            "List the files and subdirectories of a directory in the project. \
             Directories are suffixed with '/'.",
            vec![
                param("path", String, true, "Directory to list, relative to the project root."),
                param("ignore", StringArray, false, "Glob patterns for entry names to leave out."),
            ],
        ),
        ToolId::SearchFileContent => (
            "Search project files for a regular expression and return matching lines as \
             path:line:text. Patterns use Rust `regex` syntax (Perl-like classes, no \
             look-around or backreferences).",
            vec![
                param("pattern", String, true, "Regular expression to search for."),
                param("path", String, false, "Directory to search in; defaults to the project root."),
                param("include", String, false, "Glob restricting which files are searched, e.g. '*.kt'."),
            ],
        ),
        ToolId::Glob => (
            "Find files whose paths match a glob pattern. Results are ordered by \
             modification time, most recent first.",
            vec![
                param("pattern", String, true, "Glob pattern, e.g. '**/build.gradle*'."),
                param("path", String, false, "Directory to search in; defaults to the project root."),
                param("case_sensitive", Boolean, false, "Match case-sensitively (default false)."),
            ],
        ),
        ToolId::ReadFile => (
            "Read a text file from the project. Large files can be read in pieces with \
             offset and limit.",
            vec![
                param("path", String, true, "File to read."),
                param("offset", Integer, false, "Zero-based line to start from."),
                param("limit", Integer, false, "Maximum number of lines to return."),
            ],
        ),
        ToolId::Replace => (
            "Replace literal text in a file. old_string must match the file exactly, \
             including whitespace and enough surrounding lines to be unambiguous; read \
             the file first.",
            vec![
                param("file_path", String, true, "File to modify."),
                param("old_string", String, true, "Exact text to replace."),
                param("new_string", String, true, "Exact replacement text."),
                param(
                    "expected_replacements",
                    Integer,
                    false,
                    "Number of occurrences to replace; defaults to 1.",
                ),
            ],
        ),
        ToolId::SearchGoogle => (
            "Search the web for information about an error message or API.",
            vec![param("query", String, true, "Search query, typically an error message.")],
        ),
        ToolId::RunShell => (
            "Run an arbitrary shell command in the project root and return its exit code \
             and combined output.",
            vec![param("shell_command", String, true, "Command line passed to `sh -c`.")],
        ),
        ToolId::GradleBuild => (
            "Build the Android app from a clean state: stops Gradle daemons and cleans, \
             then runs the debug assemble build with the currently selected JDK. Returns \
             the build log.",
            vec![],
        ),
        ToolId::GradleTask => (
            "Run a single Gradle task through the project's wrapper, optionally with \
             diagnostic flags such as --stacktrace or --info. Returns the task output.",
            vec![
                param("task", String, true, "Gradle task name, e.g. 'assembleDebug' or ':app:dependencies'."),
                param(
                    "flags",
                    String,
                    false,
                    "Space-separated flags: --stacktrace, --full-stacktrace, --info, --debug, \
                     --warn, --quiet, --parallel, --offline, --refresh-dependencies, \
                     --dry-run, --continue, --rerun-tasks, --no-build-cache, --no-daemon, \
                     --warning-mode=<all|summary|none|fail>.",
                ),
            ],
        ),
        ToolId::SetJavaVersion => (
            "Select the JDK used by all later builds and commands by setting JAVA_HOME \
             and PATH.",
            vec![param("version", String, true, "JDK major version, e.g. '17'.")],
        ),
    };
    ToolSpec {
        name: id.as_str().into(),
        description: description.into(),
        parameters,
    }
}

/// The six general tools every agent with tools receives.
pub const BASE_TOOLS: [ToolId; 6] = [
    ToolId::ListDirectory,
    ToolId::SearchFileContent,
    ToolId::Glob,
    ToolId::ReadFile,
    ToolId::Replace,
    ToolId::SearchGoogle,
];

/// Named toolsets: the agent configurations plus every tool-ablation row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolsetPreset {
    /// No tools; the model proposes a patch in one response.
    CodingAssistant,
    /// Base tools only (no shell).
    ReadwriteOnly,
    /// Base tools plus `run_shell`.
    Shell,
    /// Base tools plus the three domain tools, no shell.
    Gradlefixer,
    /// Base tools plus `gradle_task`.
    OnlyGradleTask,
    /// Base tools plus `gradle_build`.
    OnlyGradleBuild,
    /// Base tools plus `gradle_build` and `gradle_task`.
    BuildAndTask,
    /// Base tools plus `gradle_build` and `set_java_version`.
    BuildAndJava,
    /// Base tools, `run_shell` and all three domain tools.
    ShellAndDomain,
    /// Read-only exploration tools; edits go through `delegate_edit`.
    Hierarchical,
}

impl ToolsetPreset {
    pub const ALL: [ToolsetPreset; 10] = [
        ToolsetPreset::CodingAssistant,
        ToolsetPreset::ReadwriteOnly,
        ToolsetPreset::Shell,
        ToolsetPreset::Gradlefixer,
        ToolsetPreset::OnlyGradleTask,
        ToolsetPreset::OnlyGradleBuild,
        ToolsetPreset::BuildAndTask,
        ToolsetPreset::BuildAndJava,
        ToolsetPreset::ShellAndDomain,
        ToolsetPreset::Hierarchical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolsetPreset::CodingAssistant => "coding_assistant",
            ToolsetPreset::ReadwriteOnly => "readwrite_only",
            ToolsetPreset::Shell => "shell",
            ToolsetPreset::Gradlefixer => "gradlefixer",
            ToolsetPreset::OnlyGradleTask => "only_gradle_task",
            ToolsetPreset::OnlyGradleBuild => "only_gradle_build",
            ToolsetPreset::BuildAndTask => "build_and_task",
            ToolsetPreset::BuildAndJava => "build_and_java",
            ToolsetPreset::ShellAndDomain => "shell_and_domain",
            ToolsetPreset::Hierarchical => "hierarchical",
        }
    }

    /// The canonical tool list, in declaration order.
    pub fn tools(self) -> Vec<ToolId> {
        use ToolId::*;
        let extra: &[ToolId] = match self {
            ToolsetPreset::CodingAssistant => return Vec::new(),
            ToolsetPreset::Hierarchical => {
                return vec![ListDirectory, SearchFileContent, Glob, ReadFile, SearchGoogle]
            }
            ToolsetPreset::ReadwriteOnly => &[],
            ToolsetPreset::Shell => &[RunShell],
            ToolsetPreset::Gradlefixer => &[GradleBuild, GradleTask, SetJavaVersion],
            ToolsetPreset::OnlyGradleTask => &[GradleTask],
            ToolsetPreset::OnlyGradleBuild => &[GradleBuild],
            ToolsetPreset::BuildAndTask => &[GradleBuild, GradleTask],
            ToolsetPreset::BuildAndJava => &[GradleBuild, SetJavaVersion],
            ToolsetPreset::ShellAndDomain => &[RunShell, GradleBuild, GradleTask, SetJavaVersion],
        };
        BASE_TOOLS.iter().chain(extra).copied().collect()
    }

    /// Whether runs of this preset default to the 30-call ablation budget.
    pub fn is_ablation(self) -> bool {
        matches!(
            self,
            ToolsetPreset::OnlyGradleTask
                | ToolsetPreset::OnlyGradleBuild
                | ToolsetPreset::BuildAndTask
                | ToolsetPreset::BuildAndJava
                | ToolsetPreset::ShellAndDomain
        )
    }
}

impl fmt::Display for ToolsetPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToolsetPreset {
    type Err = ToolkitError;

    /// Accepts preset identifiers and tool-ablation row labels such as
    /// "Only TOOL_B" or "Shell + TOOL_A + TOOL_B + TOOL_C".
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase();
        if let Some(p) = ToolsetPreset::ALL.into_iter().find(|p| p.as_str() == norm) {
            return Ok(p);
        }
        match norm.as_str() {
            "no_shell" | "no shell" | "no shell (baseline)" | "read_write_only" => {
                return Ok(ToolsetPreset::ReadwriteOnly)
            }
            "coding-assistant" => return Ok(ToolsetPreset::CodingAssistant),
            _ => {}
        }
        let extras = parse_tool_combination(&norm).ok_or_else(|| ToolkitError::UnknownPreset(s.to_string()))?;
        ToolsetPreset::ALL
            .into_iter()
            .filter(|p| !matches!(p, ToolsetPreset::CodingAssistant | ToolsetPreset::Hierarchical))
            .find(|p| {
                let mut mine: Vec<ToolId> = p.tools().into_iter().filter(|t| !BASE_TOOLS.contains(t)).collect();
                mine.sort();
                mine == extras
            })
            .ok_or_else(|| ToolkitError::UnknownPreset(s.to_string()))
    }
}

/// "only shell", "tool_a + tool_c" → sorted extra tools.
fn parse_tool_combination(norm: &str) -> Option<Vec<ToolId>> {
    let body = norm.strip_prefix("only ").unwrap_or(norm);
    let body = body.trim_end_matches("(ours)").trim();
    let mut tools = Vec::new();
    for token in body.split('+') {
        let tool = match token.trim() {
            "shell" | "run_shell" => ToolId::RunShell,
            "tool_a" | "gradle_build" => ToolId::GradleBuild,
            "tool_b" | "gradle_task" => ToolId::GradleTask,
            "tool_c" | "set_java_version" => ToolId::SetJavaVersion,
            _ => return None,
        };
        tools.push(tool);
    }
    tools.sort();
    tools.dedup();
    Some(tools)
}

/// Tool-ablation rows in table order, with the preset each row resolves to.
pub fn ablation_rows() -> Vec<(&'static str, ToolsetPreset)> {
    vec![
        ("No shell (Baseline)", ToolsetPreset::ReadwriteOnly),
        ("Only shell", ToolsetPreset::Shell),
        ("Only TOOL_B", ToolsetPreset::OnlyGradleTask),
        ("Only TOOL_A", ToolsetPreset::OnlyGradleBuild),
        ("TOOL_A + TOOL_B", ToolsetPreset::BuildAndTask),
        ("TOOL_A + TOOL_C", ToolsetPreset::BuildAndJava),
        ("Shell + TOOL_A + TOOL_B + TOOL_C", ToolsetPreset::ShellAndDomain),
        ("TOOL_A + TOOL_B + TOOL_C (Ours)", ToolsetPreset::Gradlefixer),
    ]
}

/// A preset name or an explicit list of extra tool identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolsetSelection {
    Preset(ToolsetPreset),
    /// Tools added on top of the base tools; an empty list is the base set.
    Custom(Vec<String>),
}

/// Resolves a selection to tool declarations in canonical order.
pub fn resolve_toolset(selection: &ToolsetSelection) -> Result<Vec<ToolSpec>, ToolkitError> {
    Ok(resolve_tool_ids(selection)?.into_iter().map(builtin_spec).collect())
}

pub fn resolve_tool_ids(selection: &ToolsetSelection) -> Result<Vec<ToolId>, ToolkitError> {
    match selection {
        ToolsetSelection::Preset(p) => Ok(p.tools()),
        ToolsetSelection::Custom(names) => {
            let mut ids: Vec<ToolId> = BASE_TOOLS.to_vec();
            for name in names {
                let id: ToolId = name
                    .parse()
                    .map_err(|_| ToolkitError::UnknownTool(name.clone()))?;
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
            Ok(ids)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradlefixer_replaces_the_shell() {
        let tools = ToolsetPreset::Gradlefixer.tools();
        assert_eq!(tools.len(), 9);
        assert!(!tools.contains(&ToolId::RunShell));
        assert!(tools.contains(&ToolId::GradleBuild));
        assert!(tools.contains(&ToolId::GradleTask));
        assert!(tools.contains(&ToolId::SetJavaVersion));
    }

    #[test]
    fn row_labels_parse_to_their_presets() {
        for (label, preset) in ablation_rows() {
            assert_eq!(label.parse::<ToolsetPreset>().unwrap(), preset, "{label}");
        }
        assert!("Only TOOL_Z".parse::<ToolsetPreset>().is_err());
    }

    #[test]
    fn empty_custom_list_is_base_only() {
        let ids = resolve_tool_ids(&ToolsetSelection::Custom(vec![])).unwrap();
        assert_eq!(ids, ToolsetPreset::ReadwriteOnly.tools());
        let err = resolve_tool_ids(&ToolsetSelection::Custom(vec!["teleport".into()])).unwrap_err();
        assert!(matches!(err, ToolkitError::UnknownTool(_)));
    }

    #[test]
    fn spec_parameter_names_are_unique() {
        for id in ToolId::ALL {
            let spec = builtin_spec(id);
            let mut names: Vec<_> = spec.parameters.iter().map(|p| p.name.clone()).collect();
            names.sort();
            names.dedup();
            assert_eq!(names.len(), spec.parameters.len());
        }
    }
}
