//! Instance generators, the lattice-oracle comparison and the property
//! checks shared by the proptest suite and the acceptance runner.
//!
//! Every check returns `Err` with a readable message instead of panicking,
//! so the acceptance runner can count failures.

#![allow(dead_code)]

use dht_core::bc::{diff_component_problems, BcDiffAux, BcLabeling};
use dht_core::dmc::{
    binary_example, dmc_component_problems, dmc_exponents, dmc_optimize_seeded, gtci_optimize, DmcAux, DmcComponent,
    DmcScheme,
};
use dht_core::iproject::{brute_force_anchored, solve, CouplingProblem};
use dht_core::mac::{component_problems, mac_exponents, MacAux, MacComponent};
use dht_core::probkit::{bsc, channel_capacity, kl_divergence, Alphabet, Channel, JointPmf};
use dht_core::problem::{HypothesisProblem, Variant};
use dht_core::search::SearchBudget;
use dht_core::gaussian::{mac_gauss_achievable, mac_gauss_separate, mac_gauss_upper, p2p_gauss_optimal, GaussianSpec};
use dht_core::Error;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn axes(spec: &[(&str, usize)]) -> Vec<Alphabet> {
    spec.iter().map(|(n, s)| Alphabet::new(*n, *s)).collect()
}

/// A pmf on `n` points bounded away from the simplex boundary.
pub fn interior(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| 0.05 + rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

pub fn rows(rng: &mut ChaCha8Rng, count: usize, width: usize) -> Vec<Vec<f64>> {
    (0..count).map(|_| interior(rng, width)).collect()
}

/// Plain `sum p log2(p / q)`, written out independently of the library.
pub fn direct_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).log2()).sum()
}

pub fn h2(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

// ---- lattice oracle ------------------------------------------------------

/// Extra slack allowed beyond the oracle's lattice gap, in bits.
pub const ORACLE_TOL: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct OracleCheck {
    pub pattern: String,
    pub solve: f64,
    pub brute: f64,
    pub gap: f64,
}

impl OracleCheck {
    pub fn passes(&self) -> bool {
        (self.solve - self.brute).abs() <= self.gap + ORACLE_TOL
    }

    /// Every lattice point is feasible, so the solver can never sit above
    /// the best of them; this holds whatever the lattice step.
    pub fn solver_below_lattice(&self) -> bool {
        self.solve <= self.brute + 1e-6
    }
}

/// Compares `solve` with the lattice oracle, on the lattice through
/// `anchor` (a coupling meeting the marginal constraints) so that thin
/// entropy-constrained feasible sets keep a lattice point. When the anchor
/// fails the entropy bound too, both sides must report infeasibility.
pub fn oracle_check(
    pattern: &str,
    cp: &CouplingProblem,
    step: f64,
    levels: usize,
    anchor: &JointPmf,
) -> Result<OracleCheck, String> {
    let s = solve(cp, 1e-9).map_err(|e| format!("{pattern}: solve: {e}"))?;
    match brute_force_anchored(cp, step, levels, anchor) {
        Ok(b) => Ok(OracleCheck { pattern: pattern.to_string(), solve: s.value, brute: b.value, gap: b.gap }),
        Err(Error::Infeasible(_)) if !s.feasible => {
            Ok(OracleCheck { pattern: pattern.to_string(), solve: 0.0, brute: 0.0, gap: 0.0 })
        }
        Err(e) => Err(format!("{pattern}: brute force: {e}")),
    }
}

/// `law` restricted to the reference axes of `cp`, in their order.
pub fn anchor_for(cp: &CouplingProblem, law: &JointPmf) -> JointPmf {
    let names = cp.reference.axis_names();
    law.marginal(&names).unwrap().permuted(&names).unwrap()
}

/// Product of the marginal targets, for constraint sets on disjoint axes:
/// the maximum-entropy coupling, feasible whenever the problem is.
pub fn product_anchor(cp: &CouplingProblem) -> JointPmf {
    let mut it = cp.marginals.iter().map(|m| m.target.clone());
    let first = it.next().expect("at least one marginal");
    let joint = it.fold(first, |acc, m| acc.product(&m).unwrap());
    joint.permuted(&cp.reference.axis_names()).unwrap()
}

/// Binary point-to-point instance: random laws on `(X, Y)`, a BSC and a
/// binary quantizer.
pub fn random_dmc_case(seed: u64) -> (HypothesisProblem, DmcAux) {
    let mut g = rng(seed);
    let xy = axes(&[("X", 2), ("Y", 2)]);
    let p = JointPmf::new(xy.clone(), interior(&mut g, 4)).unwrap();
    let q = JointPmf::new(xy, interior(&mut g, 4)).unwrap();
    let r = g.gen_range(0.02..0.48);
    let prob = HypothesisProblem::new(p, q, bsc("W", "V", r).unwrap(), Variant::Dmc).unwrap();
    let aux = DmcAux::from_rows(&rows(&mut g, 2, 2), &interior(&mut g, 2), &rows(&mut g, 2, 2)).unwrap();
    (prob, aux)
}

/// The three point-to-point patterns, anchored at the law under `H = 0`.
pub fn dmc_oracle_checks(seed: u64) -> Result<Vec<OracleCheck>, String> {
    let (prob, aux) = random_dmc_case(seed);
    let law = prob.p.compose(&aux.s_given_x).unwrap();
    let probs = dmc_component_problems(&prob, &aux).map_err(|e| e.to_string())?;
    probs
        .iter()
        .map(|(c, cp)| {
            let anchor = anchor_for(cp, &law);
            match c {
                // Only the Y marginal is fixed, which leaves six free coordinates.
                DmcComponent::Miss => oracle_check(c.name(), cp, 1.0 / 16.0, 2, &anchor),
                _ => oracle_check(c.name(), cp, 1.0 / 32.0, 3, &anchor),
            }
        })
        .collect()
}

/// Multiple-access instance small enough for the lattice oracle: binary
/// sources and quantizers, with side information, channel inputs and
/// output on single letters (the all-binary tensor has 256 entries, four
/// times the oracle's cap). Each quantizer maps `x = 0` to `s = 0`; the
/// zero cells pin lattice coordinates and keep the search affordable.
pub fn random_mac_case(seed: u64) -> (HypothesisProblem, MacAux) {
    let mut g = rng(seed);
    let src = axes(&[("X1", 2), ("X2", 2), ("Y", 1)]);
    let p = JointPmf::new(src.clone(), interior(&mut g, 4)).unwrap();
    let q = JointPmf::new(src, interior(&mut g, 4)).unwrap();
    let channel = Channel::from_rows(axes(&[("W1", 1), ("W2", 1)]), axes(&[("V", 1)]), &[vec![1.0]]).unwrap();
    let prob = HypothesisProblem::new(p, q, channel, Variant::Mac).unwrap();
    let mut quantizer = || vec![vec![1.0, 0.0], interior(&mut g, 2)];
    let (s1, s2) = (quantizer(), quantizer());
    let aux = MacAux::from_rows(&prob, &[1.0], &s1, &s2, vec![0; 4], vec![0; 4]).unwrap();
    (prob, aux)
}

/// The nine multiple-access patterns, anchored at the law under `H = 0`.
pub fn mac_oracle_checks(seed: u64) -> Result<Vec<OracleCheck>, String> {
    let (prob, aux) = random_mac_case(seed);
    let v = JointPmf::new(axes(&[("V", 1)]), vec![1.0]).unwrap();
    let law = aux.t.product(&prob.p).unwrap().compose(&aux.s1).unwrap().compose(&aux.s2).unwrap().product(&v).unwrap();
    let probs = component_problems(&prob, &aux).map_err(|e| e.to_string())?;
    probs.iter().map(|(c, cp)| oracle_check(c.name(), cp, 1.0 / 32.0, 2, &anchor_for(cp, &law))).collect()
}

/// Broadcast instance with different `X` marginals: binary sources, two
/// BSCs, binary quantizers and no private time sharing.
pub fn random_bc_case(seed: u64) -> (HypothesisProblem, BcDiffAux) {
    let mut g = rng(seed);
    let src = axes(&[("X", 2), ("Y1", 2), ("Y2", 2)]);
    let p = JointPmf::new(src.clone(), interior(&mut g, 8)).unwrap();
    let q = JointPmf::new(src, interior(&mut g, 8)).unwrap();
    let (r1, r2) = (g.gen_range(0.02..0.48), g.gen_range(0.02..0.48));
    let channel = Channel::from_fn(axes(&[("W", 2)]), axes(&[("V1", 2), ("V2", 2)]), |i, o| {
        let f = |v: usize, r: f64| if v == i[0] { 1.0 - r } else { r };
        f(o[0], r1) * f(o[1], r2)
    })
    .unwrap();
    let prob = HypothesisProblem::new(p, q, channel, Variant::Bc).unwrap();
    let (s1, s2) = (rows(&mut g, 2, 2), rows(&mut g, 2, 2));
    let (w1, w2) = (rows(&mut g, 2, 2), rows(&mut g, 2, 2));
    let ti = vec![vec![1.0]; 2];
    let aux = BcDiffAux::from_rows(&prob, [&s1, &s2], &interior(&mut g, 2), [&ti, &ti], [&w1, &w2]).unwrap();
    (prob, aux)
}

/// The cross pattern of both receivers. Its marginals sit on disjoint
/// axes, so the product coupling anchors the lattice.
pub fn bc_cross_oracle_checks(seed: u64) -> Result<Vec<OracleCheck>, String> {
    let (prob, aux) = random_bc_case(seed);
    let labeling = BcLabeling::new(0, 1).unwrap();
    let mut out = Vec::new();
    for i in 0..2 {
        let probs = diff_component_problems(&prob, labeling, &aux, i).map_err(|e| e.to_string())?;
        for (c, cp) in probs.iter().filter(|(c, _)| c.name() == "cross") {
            out.push(oracle_check(&format!("{}{}", c.name(), i + 1), cp, 1.0 / 32.0, 3, &product_anchor(cp))?);
        }
    }
    Ok(out)
}

pub fn oracle_failures(checks: &[OracleCheck]) -> Check {
    let bad: Vec<String> = checks
        .iter()
        .filter(|c| !c.passes() || !c.solver_below_lattice())
        .map(|c| format!("{}: solve {:.6} brute {:.6} gap {:.3e}", c.pattern, c.solve, c.brute, c.gap))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad.join("; "))
    }
}

// ---- properties ----------------------------------------------------------

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `D(p||q) >= 0`, agreement with the direct sum, and the chain rule
/// `D(p_AB||q_AB) = D(p_A||q_A) + sum_a p(a) D(p_B|a || q_B|a)` on an
/// `na x nb` table.
pub fn kl_chain_rule(p: &[f64], q: &[f64], na: usize, nb: usize) -> Check {
    let ab = axes(&[("A", na), ("B", nb)]);
    let pp = JointPmf::new(ab.clone(), p.to_vec()).map_err(|e| e.to_string())?;
    let qq = JointPmf::new(ab, q.to_vec()).map_err(|e| e.to_string())?;
    let joint = kl_divergence(&pp, &qq).map_err(|e| e.to_string())?;
    ensure(joint >= -1e-12, || format!("negative divergence {joint}"))?;
    let direct = direct_kl(p, q);
    ensure((joint - direct).abs() < 1e-10, || format!("library {joint} vs direct sum {direct}"))?;
    let pa = pp.marginal(&["A"]).unwrap();
    let qa = qq.marginal(&["A"]).unwrap();
    let mut chain = kl_divergence(&pa, &qa).unwrap();
    let (pc, qc) = (pp.conditional(&["B"], &["A"]).unwrap(), qq.conditional(&["B"], &["A"]).unwrap());
    for a in 0..na {
        chain += pa.probs()[a] * direct_kl(pc.row(a), qc.row(a));
    }
    ensure((joint - chain).abs() < 1e-10, || format!("chain rule {chain} vs joint {joint}"))
}

/// Capacity of a BSC is `1 - h2(r)` and of a BEC is `1 - e`.
pub fn capacity_closed_forms(r: f64, e: f64) -> Check {
    let c = channel_capacity(&bsc("W", "V", r).unwrap(), 1e-10).map_err(|e| e.to_string())?;
    ensure((c - (1.0 - h2(r))).abs() < 1e-6, || format!("BSC({r}): {c} vs {}", 1.0 - h2(r)))?;
    let bec = Channel::from_rows(axes(&[("W", 2)]), axes(&[("V", 3)]), &[vec![1.0 - e, e, 0.0], vec![0.0, e, 1.0 - e]])
        .unwrap();
    let c = channel_capacity(&bec, 1e-10).map_err(|e| e.to_string())?;
    ensure((c - (1.0 - e)).abs() < 1e-6, || format!("BEC({e}): {c} vs {}", 1.0 - e))
}

/// A random auxiliary with `|S| = 4` on the binary example, mixed towards
/// a constant quantizer until it meets the rate condition.
pub fn feasible_aux(prob: &HypothesisProblem, g: &mut ChaCha8Rng) -> DmcAux {
    let s = rows(g, 2, 4);
    let t = interior(g, 2);
    let w = rows(g, 2, 2);
    let mut lambda = 1.0;
    loop {
        let mixed: Vec<Vec<f64>> = (0..2)
            .map(|x| (0..4).map(|k| lambda * s[x][k] + (1.0 - lambda) * 0.5 * (s[0][k] + s[1][k])).collect())
            .collect();
        let aux = DmcAux::from_rows(&mixed, &t, &w).unwrap();
        if dmc_exponents(prob, &aux).unwrap().feasible || lambda == 0.0 {
            return aux;
        }
        lambda = if lambda < 1e-3 { 0.0 } else { lambda * 0.5 };
    }
}

pub fn random_binary_example(g: &mut ChaCha8Rng) -> HypothesisProblem {
    let mut draw = || g.gen_range(0.05..0.95);
    let (p0, q0, p1) = (draw(), draw(), draw());
    let r = g.gen_range(0.02..0.48);
    binary_example(p0, q0, p1, r).unwrap()
}

/// The outer search, seeded with a feasible auxiliary, returns at least
/// that auxiliary's exponent.
pub fn feasible_point_dominance(seed: u64) -> Check {
    let mut g = rng(seed);
    let prob = random_binary_example(&mut g);
    let aux = feasible_aux(&prob, &mut g);
    let own = dmc_exponents(&prob, &aux).unwrap();
    let budget = SearchBudget::new(2, 150, seed);
    let opt = dmc_optimize_seeded(&prob, DmcScheme::Uep, &DmcComponent::UEP, &budget, &[aux]).map_err(|e| e.to_string())?;
    ensure(opt.feasible(), || "optimizer returned an infeasible auxiliary".into())?;
    ensure(opt.value >= own.theta - 1e-9, || format!("optimum {} below feasible point {}", opt.value, own.theta))
}

/// Dropping constraints can only lower an I-projection: for one auxiliary,
/// miss <= dec <= standard divergences (point to point) and
/// dec12 <= dec1, dec2 <= standard (multiple access).
pub fn constraint_nesting(seed: u64) -> Check {
    let (prob, aux) = random_dmc_case(seed);
    let r = dmc_exponents(&prob, &aux).map_err(|e| e.to_string())?;
    let d_y = kl_divergence(&prob.p.marginal(&["Y"]).unwrap(), &prob.q.marginal(&["Y"]).unwrap()).unwrap();
    let dec = r.dec_coupling.value;
    ensure(d_y <= dec + 1e-7 && dec <= r.standard + 1e-7, || {
        format!("point to point: miss {d_y}, dec {dec}, standard {}", r.standard)
    })?;
    let (mprob, maux) = random_mac_case(seed);
    let m = mac_exponents(&mprob, &maux).map_err(|e| e.to_string())?;
    let div = |c: MacComponent| m.components[&c].divergence;
    let (s, d1, d2, d12) = (
        div(MacComponent::Standard),
        div(MacComponent::Dec1),
        div(MacComponent::Dec2),
        div(MacComponent::Dec12),
    );
    ensure(d12 <= d1 + 1e-7 && d12 <= d2 + 1e-7 && d1 <= s + 1e-7 && d2 <= s + 1e-7, || {
        format!("multiple access: standard {s}, dec1 {d1}, dec2 {d2}, dec12 {d12}")
    })
}

/// With a constant time-sharing variable the protected fallback costs
/// nothing, so the exponent with UEP is at least the one without.
pub fn uep_dominates_without_time_sharing(seed: u64) -> Check {
    let mut g = rng(seed);
    let prob = random_binary_example(&mut g);
    let aux = DmcAux::from_rows(&rows(&mut g, 2, 4), &[1.0, 0.0], &rows(&mut g, 2, 2)).unwrap();
    let r = dmc_exponents(&prob, &aux).map_err(|e| e.to_string())?;
    ensure(r.feasible == r.feasible_no_uep, || "rate conditions differ at constant T".into())?;
    ensure(r.theta >= r.theta_no_uep - 1e-12, || format!("with UEP {} < without {}", r.theta, r.theta_no_uep))
}

/// Testing against independence over BSCs of growing capacity: the optimal
/// exponent never decreases.
pub fn gtci_monotone_in_capacity(seed: u64) -> Check {
    let mut g = rng(seed);
    let xy = axes(&[("X", 2), ("Y", 2)]);
    let p = JointPmf::new(xy, interior(&mut g, 4)).unwrap();
    let qy = JointPmf::new(axes(&[("Y", 2)]), interior(&mut g, 2)).unwrap();
    let q = p.marginal(&["X"]).unwrap().product(&qy).unwrap();
    let budget = SearchBudget::new(4, 300, seed);
    let mut last = (f64::NEG_INFINITY, 0.0);
    for r in [0.5, 0.35, 0.2, 0.1, 0.02, 0.0] {
        let prob = HypothesisProblem::new(p.clone(), q.clone(), bsc("W", "V", r).unwrap(), Variant::Dmc).unwrap();
        let v = gtci_optimize(&prob, &[0, 0], 1e-10, &budget).map_err(|e| e.to_string())?.value;
        ensure(v >= last.0 - 1e-6, || format!("exponent fell from {} (r = {}) to {v} (r = {r})", last.0, last.1))?;
        last = (v, r);
    }
    Ok(())
}

/// A random MAC spec drawn over the whole admissible range.
pub fn random_gauss_spec(seed: u64) -> GaussianSpec {
    let mut g = rng(seed);
    GaussianSpec {
        rho: g.gen_range(0.0..=1.0),
        sigma0_sq: g.gen_range(0.1..4.0),
        sigmay_sq: g.gen_range(0.1..4.0),
        sigma_sq: g.gen_range(0.1..4.0),
        power: g.gen_range(0.0..10.0),
        ..GaussianSpec::default()
    }
}

/// Separate coding never beats the hybrid search, which never beats the
/// converse.
pub fn gauss_ordering(spec: &GaussianSpec, budget: &SearchBudget) -> Check {
    let upper = mac_gauss_upper(spec).map_err(|e| e.to_string())?;
    let hybrid = mac_gauss_achievable(spec, budget).map_err(|e| e.to_string())?.value;
    let separate = mac_gauss_separate(spec).map_err(|e| e.to_string())?.value;
    if hybrid > upper + 1e-9 {
        return Err(format!("{spec:?}: hybrid {hybrid} above upper {upper}"));
    }
    if separate > hybrid + 1e-9 {
        return Err(format!("{spec:?}: separate {separate} above hybrid {hybrid}"));
    }
    Ok(())
}

/// Monotonicity of the point-to-point optimum in both arguments, and its
/// unlimited-link limit.
pub fn p2p_monotone(rho0: (f64, f64), c: (f64, f64)) -> Check {
    let at = |rho0: f64, c: f64| p2p_gauss_optimal(&GaussianSpec { rho0, c, ..GaussianSpec::default() }).map_err(|e| e.to_string());
    let (r_lo, r_hi) = (rho0.0.min(rho0.1), rho0.0.max(rho0.1));
    let (c_lo, c_hi) = (c.0.min(c.1), c.0.max(c.1));
    let base = at(r_lo, c_lo)?;
    if at(r_hi, c_lo)? < base - 1e-12 || at(r_lo, c_hi)? < base - 1e-12 {
        return Err(format!("not monotone from rho0 = {r_lo}, C = {c_lo}"));
    }
    if r_hi < 1.0 {
        let limit = -0.5 * (1.0 - r_hi * r_hi).log2();
        let far = at(r_hi, 60.0)?;
        if (far - limit).abs() > 1e-9 {
            return Err(format!("rho0 = {r_hi}: {far} at large C, limit {limit}"));
        }
    }
    Ok(())
}
