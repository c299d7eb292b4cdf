mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::scenarios::{ABLATION_ROWS as ROWS, BASE_TOOLS as BASE};

use buildbench::agent::{AgentConfig, AgentPreset};
use buildbench::toolkit::{
    ablation_rows, builtin_spec, resolve_toolset, ParamSpec, ParamType, ToolId, ToolSpec, ToolsetPreset,
    ToolsetSelection,
};

fn names(selection: &ToolsetSelection) -> Vec<String> {
    resolve_toolset(selection).unwrap().into_iter().map(|s| s.name).collect()
}

#[test]
fn ablation_rows_resolve_to_the_labelled_tools() {
    let rows = ablation_rows();
    assert_eq!(rows.len(), ROWS.len());
    for ((label, preset), (want_label, extra)) in rows.iter().zip(ROWS) {
        assert_eq!(*label, want_label);
        let got = names(&ToolsetSelection::Preset(*preset));
        let mut want: Vec<String> = BASE.iter().map(|s| s.to_string()).collect();
        want.extend(extra.iter().map(|s| s.to_string()));
        assert_eq!(
            got.iter().collect::<BTreeSet<_>>(),
            want.iter().collect::<BTreeSet<_>>(),
            "{label}"
        );
        assert_eq!(got.len(), want.len(), "{label}: duplicates");
        // base tools come first, in canonical order
        assert_eq!(&got[..6], &BASE.map(String::from)[..], "{label}");
    }
}

#[test]
fn gradlefixer_has_no_shell() {
    let tools = names(&ToolsetSelection::Preset(ToolsetPreset::Gradlefixer));
    assert!(!tools.iter().any(|t| t == "run_shell"));
    for t in ["gradle_build", "gradle_task", "set_java_version"] {
        assert!(tools.iter().any(|x| x == t), "{t}");
    }
    let cfg = AgentConfig::preset(AgentPreset::Gradlefixer, "m");
    assert!(!cfg.toolset.iter().any(|t| t == "run_shell"));
    assert!(cfg.validate().is_ok());
}

#[test]
fn ablation_agents_get_thirty_calls() {
    for (_, preset) in ablation_rows() {
        let cfg = AgentConfig::ablation(preset, "m");
        assert_eq!(cfg.max_llm_calls, Some(30));
    }
}

#[test]
fn builtin_specs_round_trip_bit_exact() {
    for id in ToolId::ALL {
        let spec = builtin_spec(id);
        let text = serde_json::to_string(&spec).unwrap();
        let back: ToolSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        let schema = serde_json::to_string(&spec.json_schema()).unwrap();
        assert_eq!(serde_json::to_string(&back.json_schema()).unwrap(), schema);
        let pretty = serde_json::to_string_pretty(&spec).unwrap();
        let again: ToolSpec = serde_json::from_str(&pretty).unwrap();
        assert_eq!(serde_json::to_string_pretty(&again).unwrap(), pretty);
    }
}

fn param() -> impl Strategy<Value = ParamSpec> {
    (
        "[a-z_]{1,12}",
        prop::sample::select(vec![ParamType::String, ParamType::Integer, ParamType::Boolean, ParamType::StringArray]),
        any::<bool>(),
        "\\PC{0,30}",
    )
        .prop_map(|(name, ty, required, description)| ParamSpec { name, ty, required, description })
}

proptest! {
    #[test]
    fn arbitrary_specs_round_trip_bit_exact(
        name in "[a-z_]{1,16}",
        description in "\\PC{0,60}",
        parameters in prop::collection::vec(param(), 0..5),
    ) {
        let spec = ToolSpec { name, description, parameters };
        let text = serde_json::to_string(&spec).unwrap();
        let back: ToolSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}
