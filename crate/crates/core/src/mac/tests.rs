use super::*;
use crate::probkit::{binary_entropy, kl_divergence};
use crate::search::{dirichlet_rows, start_rng, SearchBudget};

fn axes(spec: &[(&str, usize)]) -> Vec<Alphabet> {
    spec.iter().map(|(n, s)| Alphabet::new(*n, *s)).collect()
}

/// `(W1, W2) -> V` with `V` the input pair, received correctly with
/// probability `1 - noise` and otherwise uniform over the other three.
fn pair_channel(noise: f64) -> Channel {
    Channel::from_fn(axes(&[("W1", 2), ("W2", 2)]), axes(&[("V", 4)]), |i, o| {
        if o[0] == i[0] * 2 + i[1] {
            1.0 - noise
        } else {
            noise / 3.0
        }
    })
    .unwrap()
}

/// Two binary symmetric channels side by side.
fn orthogonal_bsc(r1: f64, r2: f64) -> Channel {
    Channel::from_fn(axes(&[("W1", 2), ("W2", 2)]), axes(&[("V1", 2), ("V2", 2)]), |i, o| {
        let f = |w: usize, v: usize, r: f64| if w == v { 1.0 - r } else { r };
        f(i[0], o[0], r1) * f(i[1], o[1], r2)
    })
    .unwrap()
}

fn small_instance(noise: f64) -> HypothesisProblem {
    let a = axes(&[("X1", 2), ("X2", 2), ("Y", 2)]);
    let p = JointPmf::from_weights(a.clone(), vec![0.20, 0.05, 0.10, 0.15, 0.05, 0.12, 0.08, 0.25]).unwrap();
    let q = JointPmf::from_weights(a, vec![0.10, 0.15, 0.12, 0.13, 0.15, 0.10, 0.15, 0.10]).unwrap();
    HypothesisProblem::new(p, q, pair_channel(noise), Variant::Mac).unwrap()
}

fn random_aux(prob: &HypothesisProblem, seed: usize) -> MacAux {
    let mut rng = start_rng(7, seed);
    let t = dirichlet_rows(&mut rng, 1, 4, 1.0).remove(0);
    let s1 = dirichlet_rows(&mut rng, 8, 2, 1.0);
    let s2 = dirichlet_rows(&mut rng, 8, 2, 1.0);
    let f1 = vec![0, 1, 1, 0];
    let f2 = vec![0, 1, 0, 1];
    MacAux::from_rows(prob, &t, &s1, &s2, f1, f2).unwrap()
}

#[test]
fn table_has_nine_distinct_components() {
    let prob = small_instance(0.05);
    let probs = component_problems(&prob, &random_aux(&prob, 0)).unwrap();
    assert_eq!(probs.len(), 9);
    let names: std::collections::BTreeSet<_> = probs.iter().map(|(c, _)| c.name()).collect();
    assert_eq!(names.len(), 9);
}

#[test]
fn nested_constraint_sets_order_the_divergences() {
    let prob = small_instance(0.05);
    for seed in 0..4 {
        let rep = mac_exponents(&prob, &random_aux(&prob, seed)).unwrap();
        let d = |c| rep.components[&c].divergence;
        let slack = 1e-7;
        assert!(d(MacComponent::Miss1a) <= d(MacComponent::Miss1b) + slack);
        assert!(d(MacComponent::Miss2a) <= d(MacComponent::Miss2b) + slack);
        for c in [MacComponent::Dec1, MacComponent::Dec2, MacComponent::Standard] {
            assert!(d(MacComponent::Dec12) <= d(c) + slack, "seed {seed}: dec12 vs {c:?}");
        }
        for c in [MacComponent::Dec1, MacComponent::Dec2] {
            assert!(d(c) <= d(MacComponent::Standard) + slack);
        }
    }
}

#[test]
fn penalty_and_barrier_solvers_agree() {
    let prob = small_instance(0.1);
    let aux = random_aux(&prob, 3);
    let tol = 1e-7;
    let a = mac_exponents_with(&prob, &aux, InnerSolver::Barrier, tol).unwrap();
    let b = mac_exponents_with(&prob, &aux, InnerSolver::Penalty, tol).unwrap();
    for c in MacComponent::ALL {
        let (x, y) = (a.components[&c].divergence, b.components[&c].divergence);
        assert!((x - y).abs() <= 2.0 * tol + 1e-9, "{c:?}: {x} vs {y}");
    }
}

#[test]
fn identical_hypotheses_zero_standard_and_nonnegative_dec() {
    let base = small_instance(0.0);
    let prob = HypothesisProblem::new(base.p.clone(), base.p.clone(), base.channel.clone(), Variant::Mac).unwrap();
    let rep = mac_exponents(&prob, &random_aux(&prob, 1)).unwrap();
    assert!(rep.value(MacComponent::Standard).abs() < 1e-9);
    for c in [MacComponent::Dec1, MacComponent::Dec2, MacComponent::Dec12] {
        assert!(rep.components[&c].divergence.abs() < 1e-9, "{c:?}");
    }
}

#[test]
fn uncoded_transmission_is_well_defined() {
    let prob = small_instance(0.05);
    let t = vec![0.25; 4];
    let aux = MacAux::from_rows(&prob, &t, &vec![vec![1.0]; 8], &vec![vec![1.0]; 8], vec![0, 1], vec![0, 1]).unwrap();
    let rep = mac_exponents(&prob, &aux).unwrap();
    assert!(rep.feasible);
    for (c, v) in &rep.components {
        assert!(v.value.is_finite() && v.value >= -1e-9, "{c:?}: {}", v.value);
        assert!(v.offset.abs() < 1e-12, "{c:?}");
    }
}

/// `X1, X2` uniform and independent, side information `Y = (Y1, Y2)` with
/// `Yi = Xi xor Ni`, `Ni ~ Bern(noise)`; under `H = 1` the side information
/// is independent of the sources.
fn xor_instance(noise: f64, channel: Channel) -> HypothesisProblem {
    let a = axes(&[("X1", 2), ("X2", 2), ("Y1", 2), ("Y2", 2)]);
    let f = |x: usize, y: usize| if x == y { 1.0 - noise } else { noise };
    let p = JointPmf::from_fn(a.clone(), |i| 0.25 * f(i[0], i[2]) * f(i[1], i[3])).unwrap();
    let q = JointPmf::from_fn(a, |_| 1.0 / 16.0).unwrap();
    HypothesisProblem::new(p, q, channel, Variant::Mac).unwrap()
}

fn bsc_with_capacity(c: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - binary_entropy(mid) > c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn small_budget() -> SearchBudget {
    SearchBudget::new(6, 600, 0)
}

#[test]
fn orthogonal_useless_channels_leave_divergence_of_y() {
    let a = axes(&[("X1", 2), ("X2", 2), ("Y", 3)]);
    let px = [0.3, 0.7];
    let py = [0.2, 0.5, 0.3];
    let qy = [0.4, 0.4, 0.2];
    let p = JointPmf::from_fn(a.clone(), |i| 0.5 * px[i[1]] * if i[0] == 0 { 0.4 } else { 1.6 } * py[i[2]]).unwrap();
    let q = JointPmf::from_fn(a, |i| 0.5 * px[i[1]] * if i[0] == 0 { 0.4 } else { 1.6 } * qy[i[2]]).unwrap();
    let prob = HypothesisProblem::new(p, q, orthogonal_bsc(0.5, 0.5), Variant::Mac).unwrap();
    let opt = orthogonal_optimize(&prob, 1e-9, &small_budget()).unwrap();
    let d_y = kl_divergence(&prob.p.marginal(&["Y"]).unwrap(), &prob.q.marginal(&["Y"]).unwrap()).unwrap();
    assert!((opt.value - d_y).abs() < 1e-6, "{} vs {d_y}", opt.value);
}

#[test]
fn orthogonal_half_capacity_matches_symmetric_family() {
    let noise = 0.1;
    let r = bsc_with_capacity(0.5);
    let prob = xor_instance(noise, orthogonal_bsc(r, r));
    let opt = orthogonal_optimize(&prob, 1e-10, &small_budget()).unwrap();
    // Dense grid over quantizers S_i = X_i xor Bern(a_i).
    let conv = |a: f64, b: f64| a * (1.0 - b) + b * (1.0 - a);
    let mut best = 0.0f64;
    let n = 2000;
    for i in 0..=n {
        let a1 = 0.5 * i as f64 / n as f64;
        if 1.0 - binary_entropy(a1) > 0.5 {
            continue;
        }
        // The two pairs are independent, so each may use the same quantizer.
        best = best.max(2.0 * (1.0 - binary_entropy(conv(a1, noise))));
    }
    assert!((opt.value - best).abs() < 2e-3, "search {} grid {best}", opt.value);
}

#[test]
fn separate_coding_reaches_the_orthogonal_optimum() {
    let noise = 0.1;
    let r = bsc_with_capacity(0.4);
    let prob = xor_instance(noise, orthogonal_bsc(r, r));
    let orth = orthogonal_optimize(&prob, 1e-10, &small_budget()).unwrap();
    let sep = mac_separate_optimize(&prob, (3, 3), &small_budget()).unwrap();
    let check = mac_gtci(&prob, &MacGtciAux::Separate(sep.aux.clone())).unwrap();
    assert!((check - sep.value).abs() < 1e-9);
    assert!((sep.value - orth.value).abs() < 2e-3, "separate {} orthogonal {}", sep.value, orth.value);
}

#[test]
fn gtci_rejects_unstructured_instances() {
    let prob = small_instance(0.05);
    let aux = random_aux(&prob, 0);
    assert!(matches!(mac_gtci(&prob, &MacGtciAux::Hybrid(aux)), Err(Error::Precondition(_))));
}

/// Sources `X1, X2`, `Ybar`, `Z`, binary; `Q = P_{X1 X2 Z} Q_{Ybar|Z}`.
fn gtci_instance() -> HypothesisProblem {
    let a = axes(&[("X1", 2), ("X2", 2), ("Y", 2), ("Z", 2)]);
    let w = [3.0, 1.0, 2.0, 1.0, 1.0, 2.0, 1.0, 4.0, 2.0, 1.0, 1.0, 3.0, 1.0, 1.0, 2.0, 5.0];
    let p = JointPmf::from_weights(a, w.to_vec()).unwrap();
    let pxz = p.marginal(&["X1", "X2", "Z"]).unwrap();
    let q_y_given_z = Channel::from_rows(axes(&[("Z", 2)]), axes(&[("Y", 2)]), &[vec![0.7, 0.3], vec![0.25, 0.75]]).unwrap();
    let q = pxz.compose(&q_y_given_z).unwrap().permuted(&["X1", "X2", "Y", "Z"]).unwrap();
    HypothesisProblem::new(p, q, pair_channel(0.02), Variant::Mac).unwrap()
}

fn soft_aux(prob: &HypothesisProblem) -> MacAux {
    let s = |x: usize| if x == 0 { vec![0.8, 0.2] } else { vec![0.3, 0.7] };
    let rows: Vec<Vec<f64>> = (0..8).map(|k| s(k / 4)).collect();
    MacAux::from_rows(prob, &[0.1, 0.2, 0.3, 0.4], &rows, &rows, vec![0, 0, 1, 1], vec![0, 0, 1, 1]).unwrap()
}

#[test]
fn hybrid_gtci_matches_direct_summation() {
    let prob = gtci_instance();
    let aux = soft_aux(&prob);
    let got = mac_gtci(&prob, &MacGtciAux::Hybrid(aux.clone())).unwrap();

    // Index order of the joint: s1, s2, x1, x2, y, z, t1, t2, v.
    let p = &prob.p;
    let gamma = |w1: usize, w2: usize, v: usize| prob.channel.row(w1 * 2 + w2)[v];
    let q_y_given_z = |y: usize, z: usize| {
        let qyz: f64 = (0..4).map(|k| prob.q.get(&[k / 2, k % 2, y, z])).sum();
        let qz: f64 = (0..8).map(|k| prob.q.get(&[k / 4, (k / 2) % 2, k % 2, z])).sum();
        qyz / qz
    };
    let mut joint = vec![0.0; 1024];
    for (idx, slot) in joint.iter_mut().enumerate() {
        let d: Vec<usize> = (0..9).map(|k| if k == 8 { idx % 4 } else { (idx >> (9 - k)) & 1 }).collect();
        let (s1, s2, x1, x2, y, z, t1, t2, v) = (d[0], d[1], d[2], d[3], d[4], d[5], d[6], d[7], d[8]);
        let t = t1 * 2 + t2;
        let w1 = aux.f1[s1 * 2 + x1];
        let w2 = aux.f2[s2 * 2 + x2];
        *slot = aux.t.probs()[t]
            * p.get(&[x1, x2, y, z])
            * aux.s1.row(x1 * 4 + t)[s1]
            * aux.s2.row(x2 * 4 + t)[s2]
            * gamma(w1, w2, v);
    }
    let decode = |idx: usize| -> (usize, usize, usize, usize, usize, usize) {
        let bit = |k: usize| (idx >> (9 - k)) & 1;
        (bit(0) * 2 + bit(1), bit(4), bit(5), bit(6) * 2 + bit(7), idx % 4, 0)
    };
    // Marginals keyed by (z, t, v), (y, z, t, v), (s, z, t, v), (s, y, z, t, v).
    let mut ztv = vec![0.0; 2 * 4 * 4];
    let mut yztv = vec![0.0; 2 * 2 * 4 * 4];
    let mut sztv = vec![0.0; 4 * 2 * 4 * 4];
    let mut syztv = vec![0.0; 4 * 2 * 2 * 4 * 4];
    for (idx, &pr) in joint.iter().enumerate() {
        let (s, y, z, t, v, _) = decode(idx);
        ztv[(z * 4 + t) * 4 + v] += pr;
        yztv[((y * 2 + z) * 4 + t) * 4 + v] += pr;
        sztv[((s * 2 + z) * 4 + t) * 4 + v] += pr;
        syztv[(((s * 2 + y) * 2 + z) * 4 + t) * 4 + v] += pr;
    }
    let mut divergence = 0.0;
    for y in 0..2 {
        for k in 0..32 {
            let z = k / 16;
            let num = yztv[y * 32 + k];
            if num > 0.0 {
                divergence += num * (num / ztv[k] / q_y_given_z(y, z)).log2();
            }
        }
    }
    let mut info = 0.0;
    for s in 0..4 {
        for y in 0..2 {
            for k in 0..32 {
                let joint_syk = syztv[(s * 2 + y) * 32 + k];
                if joint_syk > 0.0 {
                    info += joint_syk * (joint_syk * ztv[k] / (sztv[s * 32 + k] * yztv[y * 32 + k])).log2();
                }
            }
        }
    }
    let want = divergence + info;
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
}

#[test]
fn standard_component_is_smallest_for_conditional_independence() {
    let prob = gtci_instance();
    let rep = mac_exponents(&prob, &soft_aux(&prob)).unwrap();
    let std = rep.value(MacComponent::Standard);
    for c in [MacComponent::Dec1, MacComponent::Dec2, MacComponent::Dec12] {
        assert!(rep.value(c) >= std - 1e-6, "{c:?}: {} < {std}", rep.value(c));
    }
}

#[test]
fn short_outer_search_returns_a_feasible_choice() {
    let prob = small_instance(0.05);
    let opt = mac_optimize(&prob, (1, 1), None, &SearchBudget::new(1, 20, 0)).unwrap();
    assert!(opt.report.feasible);
    assert!(opt.value >= opt.start_values[0] - 1e-9);
}
