//! The convex solver against the lattice brute force on small random
//! binary instances. The full 200-instance sweep lives in the acceptance
//! target; this keeps a quick sample in the regular suite.

mod common;

use common::*;

fn sweep(family: &str, seeds: std::ops::Range<u64>, checks: fn(u64) -> Result<Vec<OracleCheck>, String>) {
    for seed in seeds {
        let found = checks(seed).unwrap_or_else(|e| panic!("{family} seed {seed}: {e}"));
        if let Err(e) = oracle_failures(&found) {
            panic!("{family} seed {seed}: {e}");
        }
    }
}

#[test]
fn dmc_patterns_agree_with_the_lattice() {
    sweep("dmc", 0..8, dmc_oracle_checks);
}

#[test]
fn mac_patterns_agree_with_the_lattice() {
    sweep("mac", 0..8, mac_oracle_checks);
}

#[test]
fn bc_cross_patterns_agree_with_the_lattice() {
    sweep("bc", 0..20, bc_cross_oracle_checks);
}

#[test]
fn every_mac_pattern_is_checked() {
    let found = mac_oracle_checks(1).unwrap();
    assert_eq!(found.len(), 9);
    let dmc = dmc_oracle_checks(1).unwrap();
    assert_eq!(dmc.len(), 3);
}
