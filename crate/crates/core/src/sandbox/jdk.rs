use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// JDK major versions installed in the reference build environment.
pub const SUPPORTED_JDKS: [u32; 6] = [11, 17, 20, 21, 22, 23];
/// JDK selected for a fresh workspace.
pub const DEFAULT_JDK: u32 = 17;

/// Maps JDK major versions to their home directories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JdkRegistry {
    homes: BTreeMap<u32, PathBuf>,
    default: u32,
}

impl Default for JdkRegistry {
    fn default() -> Self {
        let homes = SUPPORTED_JDKS
            .iter()
            .map(|v| (*v, PathBuf::from(format!("/usr/lib/jvm/java-{v}-openjdk"))))
            .collect();
        JdkRegistry {
            homes,
            default: DEFAULT_JDK,
        }
    }
}

impl JdkRegistry {
    pub fn new(homes: BTreeMap<u32, PathBuf>, default: u32) -> Self {
        JdkRegistry { homes, default }
    }

    /// Default homes overridden by `ABB_JDK_<version>_HOME`.
    pub fn from_env() -> Self {
        let mut reg = JdkRegistry::default();
        for v in SUPPORTED_JDKS {
            if let Some(home) = std::env::var_os(format!("ABB_JDK_{v}_HOME")) {
                reg.homes.insert(v, PathBuf::from(home));
            }
        }
        reg
    }

    pub fn set_home(&mut self, version: u32, home: impl Into<PathBuf>) {
        self.homes.insert(version, home.into());
    }

    pub fn default_version(&self) -> u32 {
        self.default
    }

    pub fn home(&self, version: u32) -> Option<&Path> {
        self.homes.get(&version).map(PathBuf::as_path)
    }

    /// Accepts "17", "jdk17", "java 17", "17.0.2" and similar spellings.
    pub fn resolve(&self, spec: &str) -> Option<(u32, &Path)> {
        let digits: String = spec
            .trim()
            .chars()
            .skip_while(|c| !c.is_ascii_digit())
            .take_while(|c| c.is_ascii_digit())
            .collect();
        let version: u32 = digits.parse().ok()?;
        self.home(version).map(|h| (version, h))
    }

    pub fn versions(&self) -> Vec<u32> {
        self.homes.keys().copied().collect()
    }

    /// "11, 17, 20, 21, 22, 23"
    pub fn available_list(&self) -> String {
        self.versions()
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_common_spellings() {
        let reg = JdkRegistry::default();
        assert_eq!(reg.resolve("17").unwrap().0, 17);
        assert_eq!(reg.resolve("jdk-21").unwrap().0, 21);
        assert_eq!(reg.resolve("11.0.2").unwrap().0, 11);
        assert!(reg.resolve("13").is_none());
        assert!(reg.resolve("latest").is_none());
    }

    #[test]
    fn lists_versions_in_order() {
        assert_eq!(JdkRegistry::default().available_list(), "11, 17, 20, 21, 22, 23");
    }
}
