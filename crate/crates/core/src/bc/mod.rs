//! Broadcast testing: one transmitter observes `X`, receiver `i` observes
//! `Y_i` and channel output `V_i`, and each receiver protects the exponent
//! of its own hypothesis `h_i`.
//!
//! With `p^i` the law under `h_i` and `q^i` the law under the other one,
//! two schemes apply. When `p^1_X = p^2_X` a hybrid code with a common
//! cloud `S` and private satellites `U_1, U_2` gives a region with sum
//! constraints ([`bc_equal_region`]). Otherwise the transmitter makes a
//! tentative guess and uses separate codes per guess, and the region is a
//! rectangle ([`bc_diff_region`]).

mod different;
mod equal;

pub use different::{bc_diff_region, channel_cross_term, diff_component_problems, BcDiffAux};
pub use equal::{bc_equal_region, BcEqualAux};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probkit::{Channel, JointPmf};
use crate::problem::{HypothesisProblem, Variant};

/// Tolerance of the marginal-equality test `p^1_X = p^2_X`.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Slack on the rate conditions, which hold with non-strict inequality.
pub const FEASIBILITY_SLACK: f64 = 1e-9;
pub const SOLVER_TOL: f64 = 1e-9;

/// Hypothesis whose exponent each receiver maximizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BcLabeling {
    pub h1: u8,
    pub h2: u8,
}

impl BcLabeling {
    pub fn new(h1: u8, h2: u8) -> Result<Self> {
        if h1 > 1 || h2 > 1 {
            return Err(Error::InvalidArgument(format!("hypothesis labels must be 0 or 1, got ({h1}, {h2})")));
        }
        Ok(Self { h1, h2 })
    }

    pub fn of(&self, receiver: usize) -> u8 {
        if receiver == 0 {
            self.h1
        } else {
            self.h2
        }
    }

    /// `(p^i, q^i)` for receiver `i` (0-based).
    pub fn laws<'a>(&self, prob: &'a HypothesisProblem, receiver: usize) -> (&'a JointPmf, &'a JointPmf) {
        if self.of(receiver) == 0 {
            (&prob.p, &prob.q)
        } else {
            (&prob.q, &prob.p)
        }
    }
}

pub(crate) fn require_bc(prob: &HypothesisProblem) -> Result<()> {
    if prob.variant != Variant::Bc {
        return Err(Error::InvalidArgument("expected a broadcast problem".into()));
    }
    prob.validate()
}

/// Whether `p^1_X = p^2_X`, which decides the applicable scheme.
pub fn equal_marginals(prob: &HypothesisProblem, labeling: BcLabeling) -> Result<bool> {
    require_bc(prob)?;
    let (p1, _) = labeling.laws(prob, 0);
    let (p2, _) = labeling.laws(prob, 1);
    Ok(p1.marginal(&["X"])?.max_abs_diff(&p2.marginal(&["X"])?)? <= MARGINAL_TOL)
}

/// Output name of receiver `i` (0-based) and its side-information name.
pub(crate) fn receiver_axes(receiver: usize) -> (&'static str, &'static str) {
    if receiver == 0 {
        ("V1", "Y1")
    } else {
        ("V2", "Y2")
    }
}

/// Marginal channel `W -> V_i` of the broadcast channel.
pub(crate) fn receiver_channel(prob: &HypothesisProblem, receiver: usize) -> Result<Channel> {
    let (v, _) = receiver_axes(receiver);
    JointPmf::uniform(prob.channel.inputs().to_vec())?.compose(&prob.channel)?.conditional(&[v], &["W"])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BcComponent {
    Standard,
    /// Wrong cloud and satellite (equal marginals).
    DecA,
    /// Wrong satellite only (equal marginals).
    DecB,
    /// Wrong source codeword (different marginals).
    Dec,
    Miss,
    /// Codeword of the other guess taken for one's own (different marginals).
    Cross,
}

impl BcComponent {
    pub const EQUAL: [BcComponent; 4] = [Self::Standard, Self::DecA, Self::DecB, Self::Miss];
    pub const DIFFERENT: [BcComponent; 4] = [Self::Standard, Self::Dec, Self::Miss, Self::Cross];

    pub fn name(self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::DecA => "dec_a",
            Self::DecB => "dec_b",
            Self::Dec => "dec",
            Self::Miss => "miss",
            Self::Cross => "cross",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BcComponentValue {
    /// Minimized divergence, or the divergence term of a closed form.
    pub divergence: f64,
    /// Information terms added to it.
    pub offset: f64,
    pub value: f64,
}

impl BcComponentValue {
    pub(crate) fn new(divergence: f64, offset: f64) -> Self {
        Self { divergence, offset, value: divergence + offset }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BcCase {
    EqualMarginals,
    DifferentMarginals,
}

/// One half-plane `a1 * theta_1 + a2 * theta_2 <= rhs`.
#[derive(Clone, Debug, Serialize)]
pub struct RegionConstraint {
    pub label: String,
    pub a1: f64,
    pub a2: f64,
    /// Right-hand side as computed, possibly negative.
    pub raw: f64,
    /// Right-hand side clipped at zero, so that the origin is always inside.
    pub rhs: f64,
}

impl RegionConstraint {
    fn new(label: impl Into<String>, a1: f64, a2: f64, raw: f64) -> Self {
        Self { label: label.into(), a1, a2, raw, rhs: raw.max(0.0) }
    }
}

/// Achievable exponent pairs for one auxiliary choice: a down-closed
/// polygon in the nonnegative quadrant.
#[derive(Clone, Debug, Serialize)]
pub struct BcRegion {
    pub case: BcCase,
    pub components: [BTreeMap<BcComponent, BcComponentValue>; 2],
    /// `I(U_1;U_2|S,T)` under `p^1`; zero for different marginals.
    pub marton_penalty: f64,
    pub constraints: Vec<RegionConstraint>,
}

impl BcRegion {
    pub fn value(&self, receiver: usize, c: BcComponent) -> f64 {
        self.components[receiver][&c].value
    }

    /// Minimum over receiver `i`'s components, clipped at zero.
    pub fn cap(&self, receiver: usize) -> f64 {
        self.components[receiver].values().map(|v| v.value).fold(f64::INFINITY, f64::min).max(0.0)
    }

    /// Tightest sum constraint, clipped at zero; `+inf` when there is none.
    pub fn sum_cap(&self) -> f64 {
        self.constraints
            .iter()
            .filter(|c| c.a1 > 0.0 && c.a2 > 0.0)
            .map(|c| c.rhs)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, theta1: f64, theta2: f64) -> bool {
        const EPS: f64 = 1e-12;
        theta1 >= 0.0
            && theta2 >= 0.0
            && self.constraints.iter().all(|c| c.a1 * theta1 + c.a2 * theta2 <= c.rhs + EPS)
    }

    /// Vertices of the Pareto frontier, ordered by increasing `theta_1`.
    pub fn pareto_vertices(&self) -> Vec<(f64, f64)> {
        let (c1, c2, s) = (self.cap(0), self.cap(1), self.sum_cap());
        if !(s < c1 + c2) {
            return vec![(c1, c2)];
        }
        let left = ((s - c2).max(0.0), c2.min(s));
        let right = (c1.min(s), (s - c1).max(0.0));
        if (left.0 - right.0).abs() < 1e-15 && (left.1 - right.1).abs() < 1e-15 {
            vec![left]
        } else {
            vec![left, right]
        }
    }

    pub(crate) fn assemble(
        case: BcCase,
        components: [BTreeMap<BcComponent, BcComponentValue>; 2],
        marton_penalty: f64,
        sums: Vec<(String, f64)>,
    ) -> Self {
        let mut constraints = Vec::new();
        for (i, comps) in components.iter().enumerate() {
            let cap = comps.values().map(|v| v.value).fold(f64::INFINITY, f64::min);
            let (a1, a2) = if i == 0 { (1.0, 0.0) } else { (0.0, 1.0) };
            constraints.push(RegionConstraint::new(format!("theta{}", i + 1), a1, a2, cap));
        }
        for (label, raw) in sums {
            constraints.push(RegionConstraint::new(label, 1.0, 1.0, raw));
        }
        Self { case, components, marton_penalty, constraints }
    }
}

/// Relabels per receiver so that both protect `H = 1`, swapping the
/// `(X, Y_i)` marginals of `P` and `Q` for every receiver with `h_i = 0`.
/// Needs `P_X = Q_X`; the joint of `(Y_1, Y_2)` given `X` is rebuilt as
/// conditionally independent, which the exponents never look at.
pub fn relabel_to_common(prob: &HypothesisProblem, labeling: BcLabeling) -> Result<(HypothesisProblem, BcLabeling)> {
    require_bc(prob)?;
    let px = prob.p.marginal(&["X"])?;
    if px.max_abs_diff(&prob.q.marginal(&["X"])?)? > MARGINAL_TOL {
        return Err(Error::Precondition("relabeling needs P_X = Q_X".into()));
    }
    let pick = |receiver: usize, under_one: bool| -> Result<Channel> {
        let (_, y) = receiver_axes(receiver);
        let swap = labeling.of(receiver) == 0;
        let law = if under_one != swap { &prob.q } else { &prob.p };
        law.conditional(&[y], &["X"])
    };
    let build = |under_one: bool| -> Result<JointPmf> {
        px.compose(&pick(0, under_one)?)?.compose(&pick(1, under_one)?)?.permuted(&prob.p.axis_names())
    };
    let out = HypothesisProblem::new(build(false)?, build(true)?, prob.channel.clone(), Variant::Bc)?;
    Ok((out, BcLabeling { h1: 1, h2: 1 }))
}
