//! Rule-based root-cause labels for build logs, and dataset distributions.
//!
//! Rules live in a JSON file (an ordered list, first match wins). The default
//! rule set is embedded at compile time; [`RuleSet::from_json`] loads others.

mod summary;

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use summary::{summarize_dataset, CategoryCount, DistributionReport, MetricSummary, MethodSummary};

pub const DEFAULT_RULES_JSON: &str = include_str!("../../assets/triage_rules.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootCause {
    SyntaxCode,
    ResourceFileMissing,
    ConfigurationError,
    LibraryNotAvailable,
    NdkError,
    Unclassified,
}

impl RootCause {
    pub const ALL: [RootCause; 6] = [
        RootCause::SyntaxCode,
        RootCause::ResourceFileMissing,
        RootCause::ConfigurationError,
        RootCause::LibraryNotAvailable,
        RootCause::NdkError,
        RootCause::Unclassified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RootCause::SyntaxCode => "syntax_code",
            RootCause::ResourceFileMissing => "resource_file_missing",
            RootCause::ConfigurationError => "configuration_error",
            RootCause::LibraryNotAvailable => "library_not_available",
            RootCause::NdkError => "ndk_error",
            RootCause::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for RootCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RootCause {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RootCause::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown root cause `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("invalid rule file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("rule `{id}`: {source}")]
    Pattern {
        id: String,
        #[source]
        source: regex::Error,
    },
    #[error("rule `{0}` has no note")]
    MissingNote(String),
    #[error("duplicate rule id `{0}`")]
    Duplicate(String),
    #[error("rule `{0}` maps to unclassified")]
    Unclassified(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageRule {
    pub id: String,
    /// Regular expression, or a plain substring when `literal` is set.
    pub pattern: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub literal: bool,
    pub category: RootCause,
    pub note: String,
}

#[derive(Debug, Deserialize)]
struct RuleFile {
    version: String,
    rules: Vec<TriageRule>,
}

/// An ordered, compiled rule list.
#[derive(Debug, Clone)]
pub struct RuleSet {
    version: String,
    rules: Vec<(TriageRule, Regex)>,
}

/// The category of a log and the rule that decided it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub category: RootCause,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_id: Option<String>,
}

impl RuleSet {
    pub fn from_json(text: &str) -> Result<Self, TriageError> {
        let file: RuleFile = serde_json::from_str(text)?;
        let mut seen = std::collections::HashSet::new();
        let mut rules = Vec::with_capacity(file.rules.len());
        for rule in file.rules {
            if !seen.insert(rule.id.clone()) {
                return Err(TriageError::Duplicate(rule.id));
            }
            if rule.note.trim().is_empty() {
                return Err(TriageError::MissingNote(rule.id));
            }
            if rule.category == RootCause::Unclassified {
                return Err(TriageError::Unclassified(rule.id));
            }
            let source = if rule.literal {
                regex::escape(&rule.pattern)
            } else {
                rule.pattern.clone()
            };
            let re = Regex::new(&source).map_err(|source| TriageError::Pattern {
                id: rule.id.clone(),
                source,
            })?;
            rules.push((rule, re));
        }
        Ok(RuleSet {
            version: file.version,
            rules,
        })
    }

    /// The embedded default rules.
    pub fn builtin() -> &'static RuleSet {
        static RULES: LazyLock<RuleSet> =
            LazyLock::new(|| RuleSet::from_json(DEFAULT_RULES_JSON).expect("embedded rules are valid"));
        &RULES
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn rules(&self) -> impl Iterator<Item = &TriageRule> {
        self.rules.iter().map(|(r, _)| r)
    }

    pub fn classify(&self, log: &str) -> Classification {
        self.rules
            .iter()
            .find(|(_, re)| re.is_match(log))
            .map(|(rule, _)| Classification {
                category: rule.category,
                rule_id: Some(rule.id.clone()),
            })
            .unwrap_or(Classification {
                category: RootCause::Unclassified,
                rule_id: None,
            })
    }
}

/// Labels a log with the embedded rules.
pub fn classify_root_cause(log: &str) -> RootCause {
    RuleSet::builtin().classify(log).category
}
