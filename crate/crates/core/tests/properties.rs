use std::collections::BTreeMap;

use proptest::prelude::*;

use buildbench::benchmark::{
    dataset_to_string, read_dataset, ChangeStats, CurationMethod, DifficultyTier, ProblemInstance, RepoRef,
    SolutionRef, VerifiedBuilds,
};
use buildbench::eval::{pass_at_k, pass_at_k_first};
use buildbench::triage::RootCause;

/// Fraction of k-element index subsets of `outcomes` holding a success,
/// as (hits, subsets).
fn enumerate(outcomes: &[bool], k: usize) -> (u64, u64) {
    let n = outcomes.len();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        total += 1;
        if (0..n).any(|i| mask & (1 << i) != 0 && outcomes[i]) {
            hits += 1;
        }
    }
    (hits, total)
}

#[test]
fn pass_at_k_equals_subset_enumeration_exhaustively() {
    for n in 1..=6usize {
        for c in 0..=n {
            let outcomes: Vec<bool> = (0..n).map(|i| i < c).collect();
            for k in 1..=n {
                let (hits, total) = enumerate(&outcomes, k);
                let oracle = hits as f64 / total as f64;
                let got = pass_at_k(n as u64, c as u64, k as u64).unwrap();
                assert_eq!(got.to_bits(), oracle.to_bits(), "n={n} c={c} k={k}");
            }
        }
    }
}

#[test]
fn pass_at_k_spot_values() {
    assert_eq!(pass_at_k(4, 4, 1).unwrap(), 1.0);
    assert_eq!(pass_at_k(4, 0, 4).unwrap(), 0.0);
    assert_eq!(pass_at_k(4, 2, 2).unwrap(), 5.0 / 6.0);
    assert!(pass_at_k(4, 1, 0).is_err());
    assert!(pass_at_k(4, 1, 5).is_err());
    assert!(pass_at_k(4, 5, 1).is_err());
}

proptest! {
    #[test]
    fn pass_at_k_ignores_success_positions(outcomes in prop::collection::vec(any::<bool>(), 1..=6), k in 1usize..=6) {
        prop_assume!(k <= outcomes.len());
        let c = outcomes.iter().filter(|&&b| b).count();
        let (hits, total) = enumerate(&outcomes, k);
        let got = pass_at_k(outcomes.len() as u64, c as u64, k as u64).unwrap();
        prop_assert_eq!(got.to_bits(), (hits as f64 / total as f64).to_bits());
    }

    #[test]
    fn pass_at_k_is_monotone(n in 1u64..=12, c in 0u64..=12, k in 1u64..=12) {
        prop_assume!(c <= n && k <= n);
        let p = pass_at_k(n, c, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        if k < n {
            prop_assert!(pass_at_k(n, c, k + 1).unwrap() >= p);
        }
        if c < n {
            prop_assert!(pass_at_k(n, c + 1, k).unwrap() >= p);
        }
    }

    #[test]
    fn first_k_is_a_prefix_check(outcomes in prop::collection::vec(any::<bool>(), 1..=12), k in 1usize..=12) {
        prop_assume!(k <= outcomes.len());
        let expect = if outcomes[..k].iter().any(|&b| b) { 1.0 } else { 0.0 };
        prop_assert_eq!(pass_at_k_first(&outcomes, k).unwrap(), expect);
    }

    #[test]
    fn tiers_partition_line_counts(lines in 0u64..=2000) {
        let stats = ChangeStats { files_changed: 1, lines_changed: lines, binary_files: 0 };
        let expect = match lines {
            0..=10 => DifficultyTier::Trivial,
            11..=100 => DifficultyTier::Small,
            101..=1000 => DifficultyTier::Medium,
            _ => DifficultyTier::Large,
        };
        prop_assert_eq!(stats.tier(), expect);
    }
}

#[test]
fn tier_boundaries() {
    for (lines, tier) in [
        (0, DifficultyTier::Trivial),
        (10, DifficultyTier::Trivial),
        (11, DifficultyTier::Small),
        (100, DifficultyTier::Small),
        (101, DifficultyTier::Medium),
        (1000, DifficultyTier::Medium),
        (1001, DifficultyTier::Large),
    ] {
        let stats = ChangeStats { files_changed: 1, lines_changed: lines, binary_files: 0 };
        assert_eq!(stats.tier(), tier, "{lines}");
    }
}

fn text() -> impl Strategy<Value = String> {
    prop::string::string_regex("[ -~\n\tä€😀]{0,40}").unwrap()
}

fn instance() -> impl Strategy<Value = ProblemInstance> {
    let method = prop::sample::select(CurationMethod::ALL.to_vec());
    let category = prop::option::of(prop::sample::select(RootCause::ALL.to_vec()));
    let repo = prop_oneof![
        text().prop_map(|url| RepoRef::Git { url }),
        "[a-z/]{1,20}".prop_map(|p| RepoRef::Snapshot { path: p.into() }),
    ];
    (
        ("[a-z0-9-]{1,20}", repo, "[0-9a-f]{0,40}", prop::option::of(text())),
        (prop::option::of("[0-9a-f]{40}"), prop::option::of(text()), method, category),
        (prop::option::of(text()), text(), 0u64..50, 0u64..5000, any::<bool>(), any::<bool>()),
    )
        .prop_map(
            |((id, repo, commit, patch), (sc, sd, method, category), (note, log, files, lines, f, s))| {
                ProblemInstance {
                    id,
                    repo,
                    failing_commit: commit,
                    failing_patch: patch,
                    solution: SolutionRef { commit: sc, diff: sd },
                    method,
                    category,
                    note,
                    error_log: log,
                    change_stats: ChangeStats { files_changed: files, lines_changed: lines, binary_files: 0 },
                    verified: VerifiedBuilds { failing_build_fails: f, solution_builds: s },
                }
            },
        )
}

proptest! {
    #[test]
    fn dataset_round_trips(instances in prop::collection::vec(instance(), 0..6)) {
        // ids must be unique within a dataset
        let mut seen = BTreeMap::new();
        let instances: Vec<ProblemInstance> = instances
            .into_iter()
            .filter(|i| seen.insert(i.id.clone(), ()).is_none())
            .collect();
        let text = dataset_to_string(&instances);
        let back = read_dataset(text.as_bytes()).unwrap();
        prop_assert_eq!(back, instances);
    }
}
