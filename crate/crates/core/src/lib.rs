//! Build-repair agents for Gradle projects and the harness that evaluates them.
//!
//! The crate is organised around one agent episode: a [`sandbox::Workspace`]
//! holds a failing checkout, an [`agent`] loop drives a [`llm::ModelDriver`]
//! through a constrained [`toolkit`], and a verification build decides the
//! verdict. [`benchmark`] curates problem instances from git history,
//! [`triage`] labels failure logs, and [`eval`] turns sampled episodes into
//! pass@k and cost reports.

pub mod agent;
pub mod benchmark;
pub mod config;
pub mod eval;
pub mod fixture;
pub mod git;
pub mod llm;
pub mod numeric;
pub mod sandbox;
pub mod text;
pub mod toolkit;
pub mod triage;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/sandbox.md")]
    mod sandbox {}
    #[doc = include_str!("../../../book/src/tools.md")]
    mod tools {}
    #[doc = include_str!("../../../book/src/episodes.md")]
    mod episodes {}
    #[doc = include_str!("../../../book/src/benchmark.md")]
    mod benchmark {}
    #[doc = include_str!("../../../book/src/triage.md")]
    mod triage {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/replay.md")]
    mod replay {}
}
