use std::fmt;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::ChangeStats;
use super::BenchmarkError;
use crate::sandbox::Checkout;
use crate::triage::RootCause;

pub const DATASET_SCHEMA: &str = "buildbench.dataset/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurationMethod {
    HumanCommitted,
    DependencyAugmented,
    LlmGenerated,
}

impl CurationMethod {
    pub const ALL: [CurationMethod; 3] = [
        CurationMethod::HumanCommitted,
        CurationMethod::DependencyAugmented,
        CurationMethod::LlmGenerated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CurationMethod::HumanCommitted => "human_committed",
            CurationMethod::DependencyAugmented => "dependency_augmented",
            CurationMethod::LlmGenerated => "llm_generated",
        }
    }
}

impl fmt::Display for CurationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CurationMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CurationMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown curation method `{s}`"))
    }
}

/// Where the repository comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RepoRef {
    /// Clone URL or local repository path.
    Git { url: String },
    /// A plain directory copied as-is (replay fixtures).
    Snapshot { path: PathBuf },
}

/// The ground-truth fix.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commit: Option<String>,
    /// Patch taking the failing tree to the solution tree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<String>,
}

/// Build results recorded when the instance was curated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiedBuilds {
    pub failing_build_fails: bool,
    pub solution_builds: bool,
}

impl VerifiedBuilds {
    pub fn is_feasible(self) -> bool {
        self.failing_build_fails && self.solution_builds
    }
}

/// One reproducible build failure with a known fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub id: String,
    pub repo: RepoRef,
    /// Commit to check out; empty for snapshot repos.
    #[serde(default)]
    pub failing_commit: String,
    /// Patch applied on top of `failing_commit` to obtain the failing tree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failing_patch: Option<String>,
    pub solution: SolutionRef,
    pub method: CurationMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<RootCause>,
    /// Free-text remarks, e.g. layered failures behind the first one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub error_log: String,
    pub change_stats: ChangeStats,
    pub verified: VerifiedBuilds,
}

impl ProblemInstance {
    /// How the sandbox materializes the failing tree.
    pub fn checkout(&self) -> Checkout {
        match &self.repo {
            RepoRef::Snapshot { path } => Checkout::Snapshot { path: path.clone() },
            RepoRef::Git { url } => Checkout::Git {
                url: url.clone(),
                commit: self.failing_commit.clone(),
                patch: self.failing_patch.clone(),
            },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetHeader {
    schema: String,
    count: usize,
}

/// Writes a header line followed by one instance per line.
pub fn write_dataset<W: Write>(mut out: W, instances: &[ProblemInstance]) -> Result<(), BenchmarkError> {
    let header = DatasetHeader {
        schema: DATASET_SCHEMA.to_string(),
        count: instances.len(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for inst in instances {
        serde_json::to_writer(&mut out, inst)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn dataset_to_string(instances: &[ProblemInstance]) -> String {
    let mut buf = Vec::new();
    write_dataset(&mut buf, instances).expect("writing to memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Parses a dataset file. Blank lines are ignored.
pub fn read_dataset<R: BufRead>(input: R) -> Result<Vec<ProblemInstance>, BenchmarkError> {
    let mut lines = input.lines().enumerate().filter(|(_, l)| match l {
        Ok(text) => !text.trim().is_empty(),
        Err(_) => true,
    });
    let Some((_, first)) = lines.next() else {
        return Ok(Vec::new());
    };
    let header: DatasetHeader = serde_json::from_str(&first?)
        .map_err(|e| BenchmarkError::Dataset(format!("line 1: bad header: {e}")))?;
    if header.schema != DATASET_SCHEMA {
        return Err(BenchmarkError::Dataset(format!(
            "unsupported schema `{}` (expected {DATASET_SCHEMA})",
            header.schema
        )));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let inst = serde_json::from_str(&line?)
            .map_err(|e| BenchmarkError::Dataset(format!("line {}: {e}", i + 1)))?;
        out.push(inst);
    }
    if out.len() != header.count {
        return Err(BenchmarkError::Dataset(format!(
            "header declares {} instances, found {}",
            header.count,
            out.len()
        )));
    }
    Ok(out)
}

pub fn load_dataset(path: &std::path::Path) -> Result<Vec<ProblemInstance>, BenchmarkError> {
    let file = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(file))
}
