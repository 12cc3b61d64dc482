use super::*;

fn aux_example() -> DmcAux {
    DmcAux::from_rows(
        &[vec![0.6, 0.2, 0.1, 0.1], vec![0.1, 0.3, 0.5, 0.1]],
        &[0.3, 0.7],
        &[vec![0.8, 0.2], vec![0.35, 0.65]],
    )
    .unwrap()
}

fn example(r: f64) -> HypothesisProblem {
    binary_example(0.2, 0.3, 0.4, r).unwrap()
}

#[test]
fn fast_path_matches_reference_path() {
    let prob = example(0.1);
    let aux = aux_example();
    let full = dmc_exponents(&prob, &aux).unwrap();
    let eval = Evaluator::new(&prob, 4).unwrap();
    let v = eval.values(&aux.s_rows(), aux.t.probs(), &aux.w_rows(), &DmcComponent::UEP).unwrap();
    for c in DmcComponent::UEP.into_iter().chain([DmcComponent::MissNoUep]) {
        assert!((v.get(c) - full.value(c)).abs() < 1e-8, "{c:?}: {} vs {}", v.get(c), full.value(c));
    }
}

#[test]
fn component_problems_reproduce_the_divergence_terms() {
    let prob = example(0.1);
    let aux = aux_example();
    let full = dmc_exponents(&prob, &aux).unwrap();
    let probs = dmc_component_problems(&prob, &aux).unwrap();
    let value = |i: usize| solve(&probs[i].1, 1e-10).unwrap().value;
    assert!((value(0) - full.standard).abs() < 1e-8);
    assert!((value(1) - full.dec_coupling.value).abs() < 1e-8);
    let d_y = kl_divergence(&prob.p.marginal(&["Y"]).unwrap(), &prob.q.marginal(&["Y"]).unwrap()).unwrap();
    assert!((value(2) - d_y).abs() < 1e-8);
}

#[test]
fn identical_hypotheses_have_zero_standard_component() {
    let prob = example(0.1);
    let same = HypothesisProblem::new(prob.p.clone(), prob.p.clone(), prob.channel.clone(), Variant::Dmc).unwrap();
    let rep = dmc_exponents(&same, &aux_example()).unwrap();
    assert!(rep.standard.abs() < 1e-12, "{}", rep.standard);
}

#[test]
fn silent_scheme_leaves_divergence_of_y() {
    let prob = binary_example(0.2, 0.3, 0.4, 0.2).unwrap();
    let aux = DmcAux::from_rows(&vec![vec![1.0, 0.0, 0.0, 0.0]; 2], &[1.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let rep = dmc_exponents(&prob, &aux).unwrap();
    let d_y = kl_divergence(&prob.p.marginal(&["Y"]).unwrap(), &prob.q.marginal(&["Y"]).unwrap()).unwrap();
    assert!((rep.miss - d_y).abs() < 1e-12);
    assert!(rep.feasible);
}

#[test]
fn repair_enforces_rate_condition() {
    let prob = example(0.4);
    let eval = Evaluator::new(&prob, 4).unwrap();
    let aux = DmcAux::from_rows(
        &[vec![0.97, 0.01, 0.01, 0.01], vec![0.01, 0.97, 0.01, 0.01]],
        &[0.5, 0.5],
        &[vec![0.5, 0.5], vec![0.5, 0.5]],
    )
    .unwrap();
    let (t, w) = (aux.t.probs().to_vec(), aux.w_rows());
    assert!(eval.source_rate(&aux.s_rows()) > eval.channel_terms(&t, &w).0);
    let fixed = eval.repair(&aux.s_rows(), &t, &w, DmcScheme::Uep);
    let gap = eval.channel_terms(&t, &w).0 - eval.source_rate(&fixed);
    assert!((0.0..1e-9).contains(&gap), "{gap}");
}

#[test]
fn closed_form_matches_known_values() {
    assert!((bsc_closed_form(4.0 / 9.0) - 0.035_770).abs() < 1e-5);
}
