mod support;

use support::*;

// Fewer cases than the acceptance run; enough to catch regressions quickly.
const CASES: u32 = 64;

#[test]
fn delta_monotone_under_absorption() {
    run_property(PROPERTIES[0], CASES).unwrap();
}

#[test]
fn nearest_denser_dependency() {
    run_property(PROPERTIES[1], CASES).unwrap();
}

#[test]
fn forest_and_reservoir_are_exclusive() {
    run_property(PROPERTIES[2], CASES).unwrap();
}

#[test]
fn diff_accounts_for_cluster_count() {
    run_property(PROPERTIES[3], 256).unwrap();
}

#[test]
fn objective_is_scale_invariant() {
    run_property(PROPERTIES[4], 256).unwrap();
}
