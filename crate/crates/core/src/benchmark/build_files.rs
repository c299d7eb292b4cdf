use std::sync::LazyLock;

use globset::{GlobBuilder, GlobSet, GlobSetBuilder};

/// Paths (repo-relative, `/`-separated) treated as build configuration.
pub const BUILD_FILE_PATTERNS: [&str; 11] = [
    "**/build.gradle",
    "**/build.gradle.kts",
    "**/settings.gradle",
    "**/settings.gradle.kts",
    "**/gradle.properties",
    "gradle/wrapper/**",
    "**/gradle/wrapper/**",
    "gradle/libs.versions.toml",
    "**/gradle/libs.versions.toml",
    "**/AndroidManifest.xml",
    "**/local.properties",
];

static BUILD_FILES: LazyLock<GlobSet> = LazyLock::new(|| {
    let mut b = GlobSetBuilder::new();
    for p in BUILD_FILE_PATTERNS {
        b.add(GlobBuilder::new(p).literal_separator(true).build().unwrap());
    }
    b.build().unwrap()
});

pub fn is_build_related_file(path: &str) -> bool {
    let path = path.trim_start_matches("./");
    BUILD_FILES.is_match(path)
}
