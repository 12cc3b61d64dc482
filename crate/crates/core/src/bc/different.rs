//! Tentative-guess scheme for `p^1_X != p^2_X`: the transmitter guesses
//! which receiver's hypothesis holds and uses that receiver's source and
//! channel codes.
//!
//! The source side of the cross component is read with the other
//! receiver's quantizer: under `q^i = p^j` the transmitter quantizes with
//! `p^j_{S|X}`, so the expectation runs over `q^i_X p^j_{S|X}`.

use std::collections::BTreeMap;

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use super::{
    equal_marginals, receiver_axes, receiver_channel, require_bc, BcCase, BcComponent, BcComponentValue, BcLabeling,
    BcRegion, FEASIBILITY_SLACK, SOLVER_TOL,
};
use crate::error::{Error, Result};
use crate::iproject::{solve, CouplingProblem, EntropyConstraint};
use crate::probkit::{conditional_entropy, kl_divergence, kl_of, mutual_information, Alphabet, Channel, JointPmf};
use crate::problem::HypothesisProblem;

/// Per receiver `i`: quantizer `p^i_{S|X}`, private time sharing
/// `p^i_{T_i|T}` (axis `Ti`) and channel code `p^i_{W|T T_i}`; `T` over the
/// channel inputs is shared.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BcDiffAux {
    pub s: [Channel; 2],
    pub t: JointPmf,
    pub ti: [Channel; 2],
    pub w: [Channel; 2],
}

impl BcDiffAux {
    /// Builds an auxiliary from row lists: quantizer rows per `x`, `t` over
    /// the channel inputs, time-sharing rows per `t` and code rows per
    /// `(t, t_i)`.
    pub fn from_rows(
        prob: &HypothesisProblem,
        s_rows: [&[Vec<f64>]; 2],
        t: &[f64],
        ti_rows: [&[Vec<f64>]; 2],
        w_rows: [&[Vec<f64>]; 2],
    ) -> Result<Self> {
        let nx = prob.p.size_of("X")?;
        let w_axis = prob.channel.inputs()[0].clone();
        let t_axis = Alphabet::new("T", w_axis.size);
        let quant = |rows: &[Vec<f64>]| {
            let ns = rows.first().map_or(0, |r| r.len());
            Channel::from_rows(vec![Alphabet::new("X", nx)], vec![Alphabet::new("S", ns)], rows)
        };
        let share = |rows: &[Vec<f64>]| {
            let n = rows.first().map_or(0, |r| r.len());
            Channel::from_rows(vec![t_axis.clone()], vec![Alphabet::new("Ti", n)], rows)
        };
        let code = |rows: &[Vec<f64>], nti: usize| {
            Channel::from_rows(vec![t_axis.clone(), Alphabet::new("Ti", nti)], vec![w_axis.clone()], rows)
        };
        let ti = [share(ti_rows[0])?, share(ti_rows[1])?];
        let aux = Self {
            s: [quant(s_rows[0])?, quant(s_rows[1])?],
            t: JointPmf::new(vec![t_axis.clone()], t.to_vec())?,
            w: [code(w_rows[0], ti[0].output_len())?, code(w_rows[1], ti[1].output_len())?],
            ti,
        };
        aux.check(prob)?;
        Ok(aux)
    }

    pub fn check(&self, prob: &HypothesisProblem) -> Result<()> {
        let nx = prob.p.size_of("X")?;
        let w_axis = prob.channel.inputs()[0].clone();
        let nw = w_axis.size;
        let t_axis = Alphabet::new("T", nw);
        let bad = |why: &str| Err(Error::AxisMismatch(format!("auxiliary: {why}")));
        if self.t.axes() != [t_axis.clone()] {
            return bad("T must range over the channel inputs");
        }
        let ns = self.s[0].output_len();
        for i in 0..2 {
            let s_ok = self.s[i].inputs() == [Alphabet::new("X", nx)]
                && self.s[i].outputs().len() == 1
                && self.s[i].outputs()[0] == Alphabet::new("S", ns);
            if !s_ok {
                return bad("quantizers must map X to a common S");
            }
            if self.ti[i].inputs() != [t_axis.clone()] || self.ti[i].outputs().len() != 1 || self.ti[i].outputs()[0].name != "Ti" {
                return bad("private time sharing must map T to Ti");
            }
            let ti_axis = self.ti[i].outputs()[0].clone();
            if self.w[i].inputs() != [t_axis.clone(), ti_axis] || self.w[i].outputs() != [w_axis.clone()] {
                return bad("channel codes must map (T, Ti) to W");
            }
        }
        Ok(())
    }

    /// `p_T p^i_{Ti|T} p^i_{W|T Ti}` over `(T, Ti, W)`.
    fn channel_law(&self, i: usize) -> Result<JointPmf> {
        self.t.compose(&self.ti[i])?.compose(&self.w[i])
    }
}

/// `min E[D(p^i_{V_i|T T_i} || Gamma_{V_i|W})]` over couplings of
/// `(T, T_i, W)` with `(T, T_i) ~ p^i` and `(T, W) ~ q^i = p^j`, solved as a
/// transportation problem for every `t`. `+inf` when no coupling avoids an
/// infinite divergence.
pub fn channel_cross_term(prob: &HypothesisProblem, aux: &BcDiffAux, receiver: usize) -> Result<f64> {
    require_bc(prob)?;
    aux.check(prob)?;
    let other = 1 - receiver;
    let gamma = receiver_channel(prob, receiver)?;
    let (v, _) = receiver_axes(receiver);
    let own = aux.channel_law(receiver)?.compose(&gamma)?;
    let p_v = own.conditional(&[v], &["T", "Ti"])?;
    let p_tti = own.marginal(&["T", "Ti"])?;
    let q_tw = aux.channel_law(other)?.marginal(&["T", "W"])?;
    let (nt, nti, nw) = (p_tti.size_of("T")?, p_tti.size_of("Ti")?, q_tw.size_of("W")?);
    let cost = |t: usize, ti: usize, w: usize| kl_of(p_v.row(t * nti + ti), gamma.row(w));
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut vars = Vec::with_capacity(nt * nti * nw);
    for t in 0..nt {
        for ti in 0..nti {
            for w in 0..nw {
                let c = cost(t, ti, w);
                vars.push(if c.is_finite() { lp.add_var(c, (0.0, f64::INFINITY)) } else { lp.add_var(0.0, (0.0, 0.0)) });
            }
        }
    }
    let var = |t: usize, ti: usize, w: usize| vars[(t * nti + ti) * nw + w];
    for t in 0..nt {
        for ti in 0..nti {
            let mut e = LinearExpr::empty();
            (0..nw).for_each(|w| e.add(var(t, ti, w), 1.0));
            lp.add_constraint(e, ComparisonOp::Eq, p_tti.get(&[t, ti]));
        }
        // The last column sum is implied by the row sums.
        for w in 0..nw.saturating_sub(1) {
            let mut e = LinearExpr::empty();
            (0..nti).for_each(|ti| e.add(var(t, ti, w), 1.0));
            lp.add_constraint(e, ComparisonOp::Eq, q_tw.get(&[t, w]));
        }
    }
    match lp.solve() {
        Ok(sol) => Ok(sol.objective().max(0.0)),
        Err(minilp::Error::Infeasible) => Ok(f64::INFINITY),
        Err(e) => Err(Error::BudgetExhausted(format!("transportation problem: {e}"))),
    }
}

/// Rectangle region of the tentative-guess scheme for one auxiliary choice.
pub fn bc_diff_region(prob: &HypothesisProblem, labeling: BcLabeling, aux: &BcDiffAux) -> Result<BcRegion> {
    require_bc(prob)?;
    if equal_marginals(prob, labeling)? {
        return Err(Error::Precondition("p^1_X equals p^2_X; use the equal-marginal region".into()));
    }
    aux.check(prob)?;
    let mut comps = Vec::with_capacity(2);
    for i in 0..2 {
        comps.push(receiver_components(prob, labeling, aux, i)?);
    }
    let [c1, c2]: [BTreeMap<BcComponent, BcComponentValue>; 2] = comps.try_into().expect("two receivers");
    Ok(BcRegion::assemble(BcCase::DifferentMarginals, [c1, c2], 0.0, Vec::new()))
}

/// I-projections behind the standard, dec and cross components of receiver
/// `i` (0-based); the cross entry is its source-side part only.
pub fn diff_component_problems(
    prob: &HypothesisProblem,
    labeling: BcLabeling,
    aux: &BcDiffAux,
    i: usize,
) -> Result<Vec<(BcComponent, CouplingProblem)>> {
    require_bc(prob)?;
    aux.check(prob)?;
    source_problems(prob, labeling, aux, i)
}

fn source_problems(
    prob: &HypothesisProblem,
    labeling: BcLabeling,
    aux: &BcDiffAux,
    i: usize,
) -> Result<Vec<(BcComponent, CouplingProblem)>> {
    let (_, y) = receiver_axes(i);
    let (p, q) = labeling.laws(prob, i);
    let src = p.marginal(&["X", y])?.compose(&aux.s[i])?;
    let reference = q.marginal(&["X", y])?.compose(&aux.s[i])?;
    let h_sy = conditional_entropy(&src, &["S"], &[y])?;
    let sx = src.marginal(&["S", "X"])?;
    let standard = CouplingProblem::new(reference.clone()).with_marginal(sx.clone()).with_marginal(src.marginal(&["S", y])?);
    let dec = CouplingProblem::new(reference)
        .with_marginal(sx)
        .with_marginal(src.marginal(&[y])?)
        .with_entropy(EntropyConstraint::new(&["S"], &[y], h_sy));
    let crossed = q.marginal(&["X", y])?.compose(&aux.s[1 - i])?;
    let cross = CouplingProblem::new(crossed.clone())
        .with_marginal(crossed.marginal(&["S", "X"])?)
        .with_marginal(src.marginal(&[y])?)
        .with_entropy(EntropyConstraint::new(&["S"], &[y], h_sy));
    Ok(vec![(BcComponent::Standard, standard), (BcComponent::Dec, dec), (BcComponent::Cross, cross)])
}

fn receiver_components(
    prob: &HypothesisProblem,
    labeling: BcLabeling,
    aux: &BcDiffAux,
    i: usize,
) -> Result<BTreeMap<BcComponent, BcComponentValue>> {
    let (v, y) = receiver_axes(i);
    let (p, q) = labeling.laws(prob, i);
    let gamma = receiver_channel(prob, i)?;
    let src = p.marginal(&["X", y])?.compose(&aux.s[i])?;
    let link = aux.channel_law(i)?.compose(&gamma)?;
    let rate = mutual_information(&link, &["W"], &[v], &["T", "Ti"])?;
    let info = mutual_information(&src, &["S"], &["X"], &[y])?;
    if info > rate + FEASIBILITY_SLACK {
        return Err(Error::Infeasible(format!("receiver {}: I(S;X|Y) = {info} exceeds {rate}", i + 1)));
    }
    let offset = rate - info;
    let d_y = kl_divergence(&p.marginal(&[y])?, &q.marginal(&[y])?)?;
    let idle = aux.t.compose(&gamma.rename_input("W", "T")?)?;
    let d_v = kl_divergence(&link.marginal(&["T", v])?, &idle)?;
    let mut out = BTreeMap::new();
    for (c, cp) in source_problems(prob, labeling, aux, i)? {
        let d = solve(&cp, SOLVER_TOL)?.value;
        let v = match c {
            BcComponent::Standard => BcComponentValue::new(d, 0.0),
            BcComponent::Cross => BcComponentValue::new(d + channel_cross_term(prob, aux, i)?, offset),
            _ => BcComponentValue::new(d, offset),
        };
        out.insert(c, v);
    }
    out.insert(BcComponent::Miss, BcComponentValue::new(d_y + d_v, offset));
    Ok(out)
}
