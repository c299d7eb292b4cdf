//! Adversarial paths against the file tools: nothing outside the workspace
//! may be read, listed or modified.

mod common;

use common::scenarios::confinement_fuzz;

#[test]
fn file_tools_never_escape_the_workspace() {
    let run = confinement_fuzz();
    assert_eq!(run.paths, 50);
    assert_eq!(run.calls, 254);
    assert!(run.leaks.is_empty(), "{:#?}", run.leaks);
    // every adversarial path names an outside location, so no call may succeed
    assert!(run.accepted.is_empty(), "{:#?}", run.accepted);
    assert!(!run.outside_modified);
}
