mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use buildbench::agent::{AgentPreset, Verdict};
use buildbench::fixture::{FixtureSuite, ReplayFixture};
use buildbench::sandbox::{clean_before_build_violations, BuildStatus};
use common::fixtures_dir;

fn load(name: &str) -> ReplayFixture {
    ReplayFixture::load(&fixtures_dir().join(name)).unwrap()
}

#[test]
fn every_fixture_matches_its_golden_trajectory() {
    let started = Instant::now();
    let suite = FixtureSuite::load(&fixtures_dir()).unwrap();
    assert!(suite.fixtures.len() >= 5);
    for f in &suite.fixtures {
        let t = f.run();
        let diff = f.check(&t);
        assert!(diff.is_empty(), "{}:\n{}", f.name, diff.join("\n"));
        assert!(clean_before_build_violations(&t.verdict.commands).is_empty(), "{}", f.name);
    }
    assert!(started.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn gradlefixer_cases_resolve_with_successful_final_build() {
    for name in ["case1_gradlefixer", "case2_gradlefixer", "case3_gradlefixer"] {
        let f = load(name);
        assert_eq!(f.config.preset, AgentPreset::Gradlefixer);
        assert!(!f.config.toolset.iter().any(|t| t == "run_shell"));
        let t = f.run();
        assert_eq!(t.verdict(), Verdict::Resolved, "{name}");
        let build = t.verdict.final_build.as_ref().unwrap();
        assert_eq!(build.status, BuildStatus::Success);
        assert!(build.log.contains("BUILD SUCCESSFUL"), "{name}");
    }
}

#[test]
fn shell_agent_on_case_two_runs_out_of_budget() {
    let f = load("case2_shell");
    assert_eq!(f.config.max_llm_calls, Some(30));
    let t = f.run();
    assert_eq!(t.verdict(), Verdict::UnresolvedBudget);
    assert_eq!(t.llm_calls(), 30);
    assert!(t.verdict.final_build.is_none());
    // the script had more turns than the budget allowed
    assert!(f.script.turns.len() > 30);
}

#[test]
fn budget_fixture_records_exactly_the_budget() {
    let f = load("budget_readwrite");
    let t = f.run();
    assert_eq!(t.verdict(), Verdict::UnresolvedBudget);
    assert_eq!(t.llm_calls(), 30);
    assert_eq!(t.usage_from_steps().llm_calls, 30);
}

#[test]
fn case_one_tool_counts() {
    let t = load("case1_gradlefixer").run();
    let expected: BTreeMap<String, u64> = [
        ("gradle_build", 1),
        ("read_file", 1),
        ("replace", 5),
        ("search_file_content", 2),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    assert_eq!(t.tool_histogram(), expected);
    assert_eq!(t.llm_calls(), 10);
}

#[test]
fn case_two_surfaces_the_second_layer() {
    let t = load("case2_gradlefixer").run();
    let builds: Vec<&str> = t
        .steps
        .iter()
        .filter_map(|s| s.tool_result.as_ref())
        .filter(|r| r.name == "gradle_build")
        .map(|r| r.payload.as_str())
        .collect();
    assert_eq!(builds.len(), 2);
    assert!(builds[0].contains("Unresolved reference: BuildConfig"));
    assert!(builds[1].contains("BUILD SUCCESSFUL"));
}

#[test]
fn replays_are_deterministic() {
    for name in ["case1_gradlefixer", "case2_shell"] {
        let f = load(name);
        assert_eq!(f.run().to_normalized_jsonl(), f.run().to_normalized_jsonl());
    }
}

#[test]
fn fixture_hash_tracks_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let src = fixtures_dir().join("case3_gradlefixer");
    let dst = tmp.path().join("case3");
    for entry in walkdir::WalkDir::new(&src) {
        let entry = entry.unwrap();
        let rel = entry.path().strip_prefix(&src).unwrap();
        let target = dst.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&target).unwrap();
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
    let original = load("case3_gradlefixer").hash;
    assert_eq!(ReplayFixture::load(&dst).unwrap().hash, original);
    std::fs::write(dst.join("repo/app/build.gradle.kts"), "changed\n").unwrap();
    let changed = ReplayFixture::load(&dst).unwrap();
    assert_ne!(changed.hash, original);
    // the golden file pins the hash, so the edited copy no longer matches
    assert!(!changed.check(&changed.run()).is_empty());
}
