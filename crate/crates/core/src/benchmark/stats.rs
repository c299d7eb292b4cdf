use std::fmt;

use serde::{Deserialize, Serialize};

/// Size of a change: files touched and lines inserted plus deleted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeStats {
    pub files_changed: u64,
    pub lines_changed: u64,
    /// Binary files among `files_changed`; they contribute no lines.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub binary_files: u64,
}

fn is_zero(n: &u64) -> bool {
    *n == 0
}

impl ChangeStats {
    /// An empty change; still a valid data point but usually a curation bug.
    pub fn is_degenerate(&self) -> bool {
        self.lines_changed == 0 && self.binary_files == 0
    }

    pub fn tier(&self) -> DifficultyTier {
        DifficultyTier::of_lines(self.lines_changed)
    }
}

/// Counts files and `+`/`-` lines of a unified git diff.
///
/// Renames without content changes count as one file and zero lines. Binary
/// patches count as one file and zero lines and are tallied separately.
pub fn change_stats_from_diff(diff: &str) -> ChangeStats {
    let mut stats = ChangeStats::default();
    let mut in_hunk = false;
    for line in diff.lines() {
        if line.starts_with("diff --git ") {
            stats.files_changed += 1;
            in_hunk = false;
            continue;
        }
        if line.starts_with("Binary files ") || line == "GIT binary patch" {
            stats.binary_files += 1;
            in_hunk = false;
            continue;
        }
        if line.starts_with("@@") {
            in_hunk = true;
            continue;
        }
        if !in_hunk {
            continue;
        }
        match line.as_bytes().first() {
            Some(b'+') | Some(b'-') => stats.lines_changed += 1,
            Some(b' ') | Some(b'\\') => {}
            _ => in_hunk = false,
        }
    }
    stats
}

/// Change-size buckets by lines changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyTier {
    /// Up to 10 lines (0 included, flagged degenerate by [`ChangeStats`]).
    Trivial,
    /// 11 to 100 lines.
    Small,
    /// 101 to 1000 lines.
    Medium,
    /// More than 1000 lines.
    Large,
}

impl DifficultyTier {
    pub const ALL: [DifficultyTier; 4] = [
        DifficultyTier::Trivial,
        DifficultyTier::Small,
        DifficultyTier::Medium,
        DifficultyTier::Large,
    ];

    pub fn of_lines(lines: u64) -> Self {
        match lines {
            0..=10 => DifficultyTier::Trivial,
            11..=100 => DifficultyTier::Small,
            101..=1000 => DifficultyTier::Medium,
            _ => DifficultyTier::Large,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DifficultyTier::Trivial => "trivial",
            DifficultyTier::Small => "small",
            DifficultyTier::Medium => "medium",
            DifficultyTier::Large => "large",
        }
    }
}

impl fmt::Display for DifficultyTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn difficulty_tier(stats: &ChangeStats) -> DifficultyTier {
    stats.tier()
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIFF: &str = "\
diff --git a/app/build.gradle b/app/build.gradle
index 1111111..2222222 100644
--- a/app/build.gradle
+++ b/app/build.gradle
@@ -1,3 +1,3 @@
 plugins {
-    id 'kotlin-kapt'
+    id 'com.google.devtools.ksp'
 }
diff --git a/A.kt b/A.kt
new file mode 100644
--- /dev/null
+++ b/A.kt
@@ -0,0 +1,2 @@
+fun a() {}
+--x
\\ No newline at end of file
diff --git a/logo.png b/logo.png
index 3333333..4444444 100644
Binary files a/logo.png and b/logo.png differ
diff --git a/old.txt b/new.txt
similarity index 100%
rename from old.txt
rename to new.txt
";

    #[test]
    fn counts_lines_files_and_binaries() {
        let s = change_stats_from_diff(DIFF);
        assert_eq!(s.files_changed, 4);
        assert_eq!(s.lines_changed, 4);
        assert_eq!(s.binary_files, 1);
        assert!(!s.is_degenerate());
    }

    #[test]
    fn empty_diff_is_degenerate_trivial() {
        let s = change_stats_from_diff("");
        assert_eq!(s, ChangeStats::default());
        assert!(s.is_degenerate());
        assert_eq!(s.tier(), DifficultyTier::Trivial);
    }

    #[test]
    fn tier_boundaries() {
        let cases = [(1, "trivial"), (10, "trivial"), (11, "small"), (100, "small"), (101, "medium"), (1000, "medium"), (1001, "large")];
        for (n, tier) in cases {
            assert_eq!(DifficultyTier::of_lines(n).as_str(), tier, "{n}");
        }
    }
}
