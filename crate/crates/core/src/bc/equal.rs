//! Hybrid coding with a common cloud and private satellites, for
//! `p^1_X = p^2_X`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    equal_marginals, receiver_axes, receiver_channel, require_bc, BcCase, BcComponent, BcComponentValue, BcLabeling,
    BcRegion, FEASIBILITY_SLACK, SOLVER_TOL,
};
use crate::error::{Error, Result};
use crate::iproject::{solve, CouplingProblem, EntropyConstraint};
use crate::probkit::{conditional_entropy, kl_divergence, mutual_information, Alphabet, Channel, JointPmf};
use crate::problem::HypothesisProblem;

/// Time sharing `T` over the channel inputs, a code `P_{S U1 U2 | X T}` and
/// a symbolwise map `f(s, u1, u2, x)` stored at
/// `((s * |U1| + u1) * |U2| + u2) * |X| + x`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BcEqualAux {
    pub t: JointPmf,
    pub code: Channel,
    pub f: Vec<usize>,
}

impl BcEqualAux {
    /// `rows` are indexed by `(x, t)` row-major and run over `(s, u1, u2)`
    /// row-major.
    pub fn from_rows(
        prob: &HypothesisProblem,
        t: &[f64],
        rows: &[Vec<f64>],
        sizes: (usize, usize, usize),
        f: Vec<usize>,
    ) -> Result<Self> {
        let nx = prob.p.size_of("X")?;
        let nw = prob.channel.input_len();
        let (ns, nu1, nu2) = sizes;
        let aux = Self {
            t: JointPmf::new(vec![Alphabet::new("T", nw)], t.to_vec())?,
            code: Channel::from_rows(
                vec![Alphabet::new("X", nx), Alphabet::new("T", nw)],
                vec![Alphabet::new("S", ns), Alphabet::new("U1", nu1), Alphabet::new("U2", nu2)],
                rows,
            )?,
            f,
        };
        aux.check(prob)?;
        Ok(aux)
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        let o = self.code.outputs();
        (o[0].size, o[1].size, o[2].size)
    }

    pub fn check(&self, prob: &HypothesisProblem) -> Result<()> {
        let nx = prob.p.size_of("X")?;
        let nw = prob.channel.input_len();
        let names: Vec<&str> = self.code.outputs().iter().map(|a| a.name.as_str()).collect();
        if self.t.axes() != [Alphabet::new("T", nw)]
            || self.code.inputs() != [Alphabet::new("X", nx), Alphabet::new("T", nw)]
            || names != ["S", "U1", "U2"]
        {
            return Err(Error::AxisMismatch("auxiliary needs T over W and a code (X, T) -> (S, U1, U2)".into()));
        }
        let (ns, nu1, nu2) = self.sizes();
        if self.f.len() != ns * nu1 * nu2 * nx || self.f.iter().any(|&w| w >= nw) {
            return Err(Error::InvalidArgument("map f must send every (s, u1, u2, x) into W".into()));
        }
        Ok(())
    }

    /// `Gamma_{V1 V2 | S U1 U2 X}` through the map.
    fn induced(&self, prob: &HypothesisProblem) -> Result<Channel> {
        let nx = prob.p.size_of("X")?;
        let (ns, nu1, nu2) = self.sizes();
        let inputs = vec![Alphabet::new("S", ns), Alphabet::new("U1", nu1), Alphabet::new("U2", nu2), Alphabet::new("X", nx)];
        let width = prob.channel.output_len();
        let mut kernel = Vec::with_capacity(self.f.len() * width);
        for &w in &self.f {
            kernel.extend_from_slice(prob.channel.row(w));
        }
        Channel::new(inputs, prob.channel.outputs().to_vec(), kernel)
    }

    fn law(&self, source: &JointPmf, gamma: &Channel) -> Result<JointPmf> {
        self.t.product(source)?.compose(&self.code)?.compose(gamma)
    }
}

/// Region of the hybrid scheme for one auxiliary choice.
pub fn bc_equal_region(prob: &HypothesisProblem, labeling: BcLabeling, aux: &BcEqualAux) -> Result<BcRegion> {
    require_bc(prob)?;
    if !equal_marginals(prob, labeling)? {
        return Err(Error::Precondition("p^1_X differs from p^2_X; use the different-marginal region".into()));
    }
    aux.check(prob)?;
    let gamma = aux.induced(prob)?;
    let mut joints = Vec::with_capacity(2);
    let mut refs = Vec::with_capacity(2);
    for i in 0..2 {
        let (p, q) = labeling.laws(prob, i);
        joints.push(aux.law(p, &gamma)?);
        refs.push(aux.law(q, &gamma)?);
    }
    check_rates(&joints)?;
    let components: Vec<BTreeMap<BcComponent, BcComponentValue>> =
        (0..2).map(|i| receiver_components(prob, labeling, aux, i, &joints[i], &refs[i])).collect::<Result<_>>()?;
    let [c1, c2]: [BTreeMap<BcComponent, BcComponentValue>; 2] = components.try_into().expect("two receivers");
    let penalty = mutual_information(&joints[0], &["U1"], &["U2"], &["S", "T"])?;
    let v = |m: &BTreeMap<BcComponent, BcComponentValue>, c| m[&c].value;
    use BcComponent::*;
    let pairs = [
        v(&c1, Standard) + v(&c2, Standard),
        v(&c1, Standard) + v(&c2, DecA),
        v(&c1, Standard) + v(&c2, DecB),
        v(&c2, Standard) + v(&c1, DecA),
        v(&c2, Standard) + v(&c1, DecB),
        v(&c1, Miss) + v(&c2, Miss),
    ];
    let sum_a = pairs.iter().copied().fold(f64::INFINITY, f64::min) - penalty;
    let sum_b = v(&c1, DecA).min(v(&c1, DecB)) + v(&c2, DecA).min(v(&c2, DecB)) - 2.0 * penalty;
    Ok(BcRegion::assemble(
        BcCase::EqualMarginals,
        [c1, c2],
        penalty,
        vec![("sum_mixed".into(), sum_a), ("sum_dec".into(), sum_b)],
    ))
}

/// The rate conditions of the hybrid scheme, non-strict with slack.
fn check_rates(joints: &[JointPmf]) -> Result<()> {
    let mi = |i: usize, a: &[&str], b: &[&str], g: &[&str]| mutual_information(&joints[i], a, b, g);
    let mut conds: Vec<(String, f64, f64)> = Vec::new();
    let mut cloud = [0.0; 2];
    let mut sat = [0.0; 2];
    let mut cloud_rx = [0.0; 2];
    let mut sat_rx = [0.0; 2];
    for i in 0..2 {
        let (v, y) = receiver_axes(i);
        let u = if i == 0 { "U1" } else { "U2" };
        cloud[i] = mi(0, &["S", u], &["X"], &["T"])?;
        sat[i] = mi(0, &[u], &["X"], &["S", "T"])?;
        cloud_rx[i] = mi(i, &["S", u], &[y, v], &["T"])?;
        sat_rx[i] = mi(i, &[u], &[y, v], &["S", "T"])?;
        conds.push((format!("cloud rate of receiver {}", i + 1), mi(i, &["S", u], &["X"], &["T"])?, cloud_rx[i]));
        conds.push((format!("satellite rate of receiver {}", i + 1), mi(i, &[u], &["X"], &["S", "T"])?, sat_rx[i]));
    }
    let shared = mi(0, &["U1"], &["U2"], &["S", "T"])?;
    conds.push(("cloud + cloud".into(), cloud[0] + cloud[1] + shared, cloud_rx[0] + cloud_rx[1]));
    conds.push(("satellite + satellite".into(), sat[0] + sat[1] + shared, sat_rx[0] + sat_rx[1]));
    conds.push(("satellite + cloud".into(), sat[0] + cloud[1] + shared, sat_rx[0] + cloud_rx[1]));
    conds.push(("cloud + satellite".into(), cloud[0] + sat[1] + shared, cloud_rx[0] + sat_rx[1]));
    for (name, l, r) in conds {
        if l > r + FEASIBILITY_SLACK {
            return Err(Error::Infeasible(format!("{name}: {l} > {r}")));
        }
    }
    Ok(())
}

fn receiver_components(
    prob: &HypothesisProblem,
    labeling: BcLabeling,
    aux: &BcEqualAux,
    i: usize,
    joint: &JointPmf,
    reference: &JointPmf,
) -> Result<BTreeMap<BcComponent, BcComponentValue>> {
    let (v, y) = receiver_axes(i);
    let u = if i == 0 { "U1" } else { "U2" };
    let axes = ["S", u, "X", y, "T", v];
    let j = joint.marginal(&axes)?;
    let r = reference.marginal(&axes)?;
    let marg = |names: &[&str]| j.marginal(names);
    let source_side = marg(&["S", u, "X", "T"])?;
    let standard = CouplingProblem::new(r.clone()).with_marginal(source_side.clone()).with_marginal(marg(&["S", u, y, "T", v])?);
    let dec_a = CouplingProblem::new(r.clone())
        .with_marginal(source_side.clone())
        .with_marginal(marg(&[y, "T", v])?)
        .with_entropy(EntropyConstraint::new(&["S", u], &[y, "T", v], conditional_entropy(&j, &["S", u], &[y, "T", v])?));
    let dec_b = CouplingProblem::new(r)
        .with_marginal(source_side)
        .with_marginal(marg(&["S", y, "T", v])?)
        .with_entropy(EntropyConstraint::new(&[u], &["S", y, "T", v], conditional_entropy(&j, &[u], &["S", y, "T", v])?));
    let offset_a = mutual_information(&j, &["S", u], &[y, v], &["T"])? - mutual_information(&j, &["S", u], &["X"], &["T"])?;
    let offset_b = mutual_information(&j, &[u], &[y, v], &["S", "T"])? - mutual_information(&j, &[u], &["X"], &["S", "T"])?;
    let problems = [(BcComponent::Standard, standard, 0.0), (BcComponent::DecA, dec_a, offset_a), (BcComponent::DecB, dec_b, offset_b)];
    let mut out: BTreeMap<BcComponent, BcComponentValue> = problems
        .into_par_iter()
        .map(|(c, cp, off)| Ok((c, BcComponentValue::new(solve(&cp, SOLVER_TOL)?.value, off))))
        .collect::<Result<_>>()?;
    // Missed detection: E_T D(p_{Y V|T} || q_Y Gamma_{V|W=T}).
    let (_, q) = labeling.laws(prob, i);
    let fallback = aux.t.product(&q.marginal(&[y])?)?.compose(&receiver_channel(prob, i)?.rename_input("W", "T")?)?;
    let miss = kl_divergence(&j.marginal(&["T", y, v])?, &fallback)?;
    out.insert(BcComponent::Miss, BcComponentValue::new(miss, offset_a));
    Ok(out)
}
