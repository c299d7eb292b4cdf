//! Problem instances, change statistics and the curation pipelines.

mod build_files;
mod curate;
mod instance;
mod stats;

use thiserror::Error;

pub use build_files::{is_build_related_file, BUILD_FILE_PATTERNS};
pub use curate::{
    commit_tree_digest, solution_tree_digest, CurationLog, Curator, ForgeClient, LocalForge, PullRequest, Skip,
    CHANGELOG_FILES, GENERATION_PROMPT,
};
pub use instance::{
    dataset_to_string, load_dataset, read_dataset, write_dataset, CurationMethod, ProblemInstance, RepoRef,
    SolutionRef, VerifiedBuilds, DATASET_SCHEMA,
};
pub use stats::{change_stats_from_diff, difficulty_tier, ChangeStats, DifficultyTier};

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Git(#[from] crate::git::GitError),
    #[error(transparent)]
    Sandbox(#[from] crate::sandbox::SandboxError),
}

/// Stats of the problem-introducing diff.
pub fn compute_change_stats(introducing_diff: &str) -> ChangeStats {
    change_stats_from_diff(introducing_diff)
}
