use std::collections::BTreeMap;

use super::spec::{ToolCall, ToolErrorKind, ToolResult};
use super::ToolContext;

pub const OFFLINE_SEARCH_PAYLOAD: &str = "no results available offline";

/// Pluggable web-search provider.
pub trait SearchBackend: Send + Sync {
    /// Returns result text, or a transport error message.
    fn search(&self, query: &str) -> Result<String, String>;
}

/// The default backend: answers every query with a fixed notice.
#[derive(Debug, Default, Clone, Copy)]
pub struct OfflineSearch;

impl SearchBackend for OfflineSearch {
    fn search(&self, _query: &str) -> Result<String, String> {
        Ok(OFFLINE_SEARCH_PAYLOAD.to_string())
    }
}

/// Canned answers keyed by query, for replay fixtures.
#[derive(Debug, Default, Clone)]
pub struct FixtureSearch {
    answers: BTreeMap<String, String>,
}

impl FixtureSearch {
    pub fn new(answers: BTreeMap<String, String>) -> Self {
        FixtureSearch { answers }
    }
}

impl SearchBackend for FixtureSearch {
    fn search(&self, query: &str) -> Result<String, String> {
        if let Some(hit) = self.answers.get(query) {
            return Ok(hit.clone());
        }
        let lower = query.to_lowercase();
        Ok(self
            .answers
            .iter()
            .find(|(k, _)| lower.contains(&k.to_lowercase()))
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| format!("no results for \"{query}\"")))
    }
}

pub(super) fn search_google(call: &ToolCall, ctx: &mut ToolContext<'_>) -> ToolResult {
    let query = call.str_arg("query").unwrap_or_default();
    if query.trim().is_empty() {
        return ToolResult::error(call, ToolErrorKind::InvalidArguments, "empty query");
    }
    match ctx.search.search(query) {
        Ok(text) => ToolResult::ok(call, text),
        Err(e) => ToolResult::error(call, ToolErrorKind::Backend, format!("search failed: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_lookup_prefers_exact_then_substring() {
        let s = FixtureSearch::new(BTreeMap::from([
            ("kapt".to_string(), "use ksp".to_string()),
            ("BuildConfig".to_string(), "enable buildConfig".to_string()),
        ]));
        assert_eq!(s.search("kapt").unwrap(), "use ksp");
        assert_eq!(
            s.search("Unresolved reference: buildconfig").unwrap(),
            "enable buildConfig"
        );
        assert!(s.search("nothing").unwrap().starts_with("no results"));
        assert_eq!(OfflineSearch.search("x").unwrap(), OFFLINE_SEARCH_PAYLOAD);
    }
}
