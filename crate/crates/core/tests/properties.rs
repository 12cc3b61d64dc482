//! Randomized invariants of the exponent machinery.

mod common;

use common::*;
use dht_core::gaussian::{default_budget, GaussianSpec};
use dht_core::search::SearchBudget;
use proptest::prelude::*;

fn pmf(len: usize, zeros: bool) -> impl Strategy<Value = Vec<f64>> {
    let lo = if zeros { 0.0 } else { 0.01 };
    prop::collection::vec(lo..1.0f64, len).prop_filter_map("positive mass", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
    })
}

fn chain_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, usize, usize)> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(na, nb)| (pmf(na * nb, true), pmf(na * nb, false), Just(na), Just(nb)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kl_obeys_the_chain_rule((p, q, na, nb) in chain_case()) {
        prop_assert_eq!(kl_chain_rule(&p, &q, na, nb), Ok(()));
    }

    #[test]
    fn capacity_matches_bsc_and_bec(r in 0.0..=0.5f64, e in 0.0..=1.0f64) {
        prop_assert_eq!(capacity_closed_forms(r, e), Ok(()));
    }

    #[test]
    fn p2p_gaussian_is_monotone(a in 0.0..=1.0f64, b in 0.0..=1.0f64, c in 0.0..8.0f64, d in 0.0..8.0f64) {
        prop_assert_eq!(p2p_monotone((a, b), (c, d)), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn uep_is_never_worse_without_time_sharing(seed in any::<u64>()) {
        prop_assert_eq!(uep_dominates_without_time_sharing(seed), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tighter_constraints_give_smaller_divergences(seed in any::<u64>()) {
        prop_assert_eq!(constraint_nesting(seed), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optimizer_dominates_any_feasible_point(seed in any::<u64>()) {
        prop_assert_eq!(feasible_point_dominance(seed), Ok(()));
    }

    #[test]
    fn gaussian_schemes_are_ordered(seed in any::<u64>()) {
        prop_assert_eq!(gauss_ordering(&random_gauss_spec(seed), &default_budget()), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn gtci_exponent_grows_with_capacity(seed in any::<u64>()) {
        prop_assert_eq!(gtci_monotone_in_capacity(seed), Ok(()));
    }
}

#[test]
fn gaussian_ordering_holds_at_the_edges() {
    let budget = SearchBudget::new(16, 200, 3);
    for rho in [0.0, 0.5, 1.0] {
        for power in [0.0, 1e-3, 25.0] {
            let spec = GaussianSpec { rho, power, sigmay_sq: 1.5, ..GaussianSpec::default() };
            assert_eq!(gauss_ordering(&spec, &budget), Ok(()));
        }
    }
}

#[test]
fn p2p_gaussian_saturates_at_full_correlation() {
    assert_eq!(p2p_monotone((1.0, 1.0), (0.0, 30.0)), Ok(()));
}
