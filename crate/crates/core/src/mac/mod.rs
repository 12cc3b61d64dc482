//! Multiple-access testing with hybrid coding.
//!
//! Transmitter `i` quantizes `X_i` to `S_i` superposed on a time-sharing
//! pair `(T1, T2)` and sends `W_i = f_i(S_i, X_i)`; when quantization fails
//! it sends `T_i`. The receiver sees the channel output and its own side
//! information (every source axis other than `X1`, `X2`). Each of the nine
//! competing exponent components is an I-projection read off a constraint
//! table, plus an offset of mutual informations.

mod optimize;
mod special;

pub use optimize::{mac_optimize, MacOptimum};
pub use special::{
    mac_gtci, mac_separate_optimize, orthogonal_optimal, orthogonal_optimize, MacGtciAux, MacSeparateAux,
    OrthogonalOptimum, SeparateOptimum,
};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iproject::{solve, solve_penalty, CouplingProblem, EntropyConstraint, SolveReport};
use crate::probkit::{conditional_entropy, mutual_information, Alphabet, Channel, JointPmf};
use crate::problem::{ExponentReport, HypothesisProblem, Variant};

/// Default cap on every alphabet of a multiple-access instance.
pub const MAC_ALPHABET_CAP: usize = 4;
/// Slack on the three rate conditions.
pub const FEASIBILITY_SLACK: f64 = 1e-9;
pub const SOLVER_TOL: f64 = 1e-9;

/// Auxiliary choice: time-sharing pair `(T1, T2)` on `W1 x W2`, quantizers
/// `P_{S_i | X_i T1 T2}`, and symbolwise maps `f_i(s, x)` stored at index
/// `s * |X_i| + x`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MacAux {
    pub t: JointPmf,
    pub s1: Channel,
    pub s2: Channel,
    pub f1: Vec<usize>,
    pub f2: Vec<usize>,
}

/// Sizes of the alphabets of one instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Dims {
    pub x1: usize,
    pub x2: usize,
    pub w1: usize,
    pub w2: usize,
}

impl Dims {
    pub fn of(prob: &HypothesisProblem) -> Result<Self> {
        Ok(Self {
            x1: prob.p.size_of("X1")?,
            x2: prob.p.size_of("X2")?,
            w1: input_size(&prob.channel, "W1")?,
            w2: input_size(&prob.channel, "W2")?,
        })
    }
}

fn input_size(ch: &Channel, name: &str) -> Result<usize> {
    ch.inputs()
        .iter()
        .find(|a| a.name == name)
        .map(|a| a.size)
        .ok_or_else(|| Error::UnknownAxis(name.into()))
}

impl MacAux {
    /// Builds an auxiliary from row lists: `t` over `W1 x W2` (row-major),
    /// quantizer rows indexed by `(x_i, t1, t2)` row-major.
    pub fn from_rows(
        prob: &HypothesisProblem,
        t: &[f64],
        s1_rows: &[Vec<f64>],
        s2_rows: &[Vec<f64>],
        f1: Vec<usize>,
        f2: Vec<usize>,
    ) -> Result<Self> {
        let d = Dims::of(prob)?;
        let ns1 = s1_rows.first().map_or(0, |r| r.len());
        let ns2 = s2_rows.first().map_or(0, |r| r.len());
        let t_axes = vec![Alphabet::new("T1", d.w1), Alphabet::new("T2", d.w2)];
        let with_t = |x: &str, n: usize| {
            let mut v = vec![Alphabet::new(x, n)];
            v.extend(t_axes.iter().cloned());
            v
        };
        let aux = Self {
            t: JointPmf::new(t_axes.clone(), t.to_vec())?,
            s1: Channel::from_rows(with_t("X1", d.x1), vec![Alphabet::new("S1", ns1)], s1_rows)?,
            s2: Channel::from_rows(with_t("X2", d.x2), vec![Alphabet::new("S2", ns2)], s2_rows)?,
            f1,
            f2,
        };
        aux.check(prob)?;
        Ok(aux)
    }

    pub fn s_sizes(&self) -> (usize, usize) {
        (self.s1.output_len(), self.s2.output_len())
    }

    pub fn check(&self, prob: &HypothesisProblem) -> Result<()> {
        let d = Dims::of(prob)?;
        let (ns1, ns2) = self.s_sizes();
        let t_axes = [Alphabet::new("T1", d.w1), Alphabet::new("T2", d.w2)];
        let quant_ok = |ch: &Channel, x: &str, nx: usize, s: &str| {
            ch.inputs() == [Alphabet::new(x, nx), t_axes[0].clone(), t_axes[1].clone()]
                && ch.outputs().len() == 1
                && ch.outputs()[0].name == s
        };
        if self.t.axes() != t_axes
            || !quant_ok(&self.s1, "X1", d.x1, "S1")
            || !quant_ok(&self.s2, "X2", d.x2, "S2")
        {
            return Err(Error::AxisMismatch(
                "auxiliary needs T1 x T2 over the channel inputs and quantizers S_i | X_i, T1, T2".into(),
            ));
        }
        let map_ok = |f: &[usize], len: usize, nw: usize| f.len() == len && f.iter().all(|&w| w < nw);
        if !map_ok(&self.f1, ns1 * d.x1, d.w1) || !map_ok(&self.f2, ns2 * d.x2, d.w2) {
            return Err(Error::InvalidArgument("maps f_i must send every (s, x) into W_i".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacComponent {
    Standard,
    Dec1,
    Dec2,
    Dec12,
    Miss1a,
    Miss1b,
    Miss2a,
    Miss2b,
    Miss12,
}

impl MacComponent {
    pub const ALL: [MacComponent; 9] = [
        Self::Standard,
        Self::Dec1,
        Self::Dec2,
        Self::Dec12,
        Self::Miss1a,
        Self::Miss1b,
        Self::Miss2a,
        Self::Miss2b,
        Self::Miss12,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Dec1 => "dec1",
            Self::Dec2 => "dec2",
            Self::Dec12 => "dec12",
            Self::Miss1a => "miss1a",
            Self::Miss1b => "miss1b",
            Self::Miss2a => "miss2a",
            Self::Miss2b => "miss2b",
            Self::Miss12 => "miss12",
        }
    }
}

/// Variable groups of the constraint table; `Y` stands for all side axes,
/// `T` for `(T1, T2)` and `V` for all channel outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    S1,
    S2,
    X1,
    X2,
    Y,
    T,
    V,
}

/// Which reference law the divergence is taken against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Reference {
    /// `P_{S1|X1T} P_{S2|X2T} Q_{X1X2Y} P_T G_{V|S1S2X1X2}`.
    Full,
    /// Transmitter 1 sent `T1`: `P_{S2|X2T} Q_{X2Y} P_T G(v | t1, f2(s2, x2))`.
    FallbackOne,
    /// Transmitter 2 sent `T2`.
    FallbackTwo,
    /// Both sent the time-sharing symbols: `P_T Q_Y G(v | t1, t2)`.
    FallbackBoth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Offset {
    /// `I(S1;Y,V|S2,T) - I(S1;X1|S2,T)`.
    One,
    /// `I(S2;Y,V|S1,T) - I(S2;X2|S1,T)`.
    Two,
    /// `I(S1,S2;Y,V|T) - I(S1,S2;X1,X2|T)`.
    Both,
    Zero,
}

struct Pattern {
    component: MacComponent,
    reference: Reference,
    marginals: &'static [&'static [Role]],
    /// `H_P(target | given) <= H_pi(target | given)`.
    entropy: Option<(&'static [Role], &'static [Role])>,
    offset: Offset,
}

use Role::*;

const PATTERNS: [Pattern; 9] = [
    Pattern {
        component: MacComponent::Standard,
        reference: Reference::Full,
        marginals: &[&[S1, X1, T], &[S2, X2, T], &[S1, S2, Y, T, V]],
        entropy: None,
        offset: Offset::Zero,
    },
    Pattern {
        component: MacComponent::Dec1,
        reference: Reference::Full,
        marginals: &[&[S1, X1, T], &[S2, X2, T], &[S2, Y, T, V]],
        entropy: Some((&[S1], &[S2, Y, T, V])),
        offset: Offset::One,
    },
    Pattern {
        component: MacComponent::Dec2,
        reference: Reference::Full,
        marginals: &[&[S1, X1, T], &[S2, X2, T], &[S1, Y, T, V]],
        entropy: Some((&[S2], &[S1, Y, T, V])),
        offset: Offset::Two,
    },
    Pattern {
        component: MacComponent::Dec12,
        reference: Reference::Full,
        marginals: &[&[S1, X1, T], &[S2, X2, T], &[Y, T, V]],
        entropy: Some((&[S1, S2], &[Y, T, V])),
        offset: Offset::Both,
    },
    Pattern {
        component: MacComponent::Miss1a,
        reference: Reference::FallbackOne,
        marginals: &[&[S2, X2, T], &[Y, T, V]],
        entropy: Some((&[S2], &[Y, T, V])),
        offset: Offset::Both,
    },
    Pattern {
        component: MacComponent::Miss1b,
        reference: Reference::FallbackOne,
        marginals: &[&[S2, X2, T], &[S2, Y, T, V]],
        entropy: None,
        offset: Offset::One,
    },
    Pattern {
        component: MacComponent::Miss2a,
        reference: Reference::FallbackTwo,
        marginals: &[&[S1, X1, T], &[Y, T, V]],
        entropy: Some((&[S1], &[Y, T, V])),
        offset: Offset::Both,
    },
    Pattern {
        component: MacComponent::Miss2b,
        reference: Reference::FallbackTwo,
        marginals: &[&[S1, X1, T], &[S1, Y, T, V]],
        entropy: None,
        offset: Offset::Two,
    },
    // The expectation of D(P_{YV|T} || Q_Y G(.|T)) is an I-projection whose
    // only constraint pins the whole (Y, T, V) law.
    Pattern {
        component: MacComponent::Miss12,
        reference: Reference::FallbackBoth,
        marginals: &[&[Y, T, V]],
        entropy: None,
        offset: Offset::Both,
    },
];

/// Which I-projection routine evaluates the components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InnerSolver {
    #[default]
    Barrier,
    Penalty,
}

/// Joint law under `H = 0` and the axis names of each role.
pub(crate) struct MacModel<'a> {
    prob: &'a HypothesisProblem,
    aux: &'a MacAux,
    pub joint: JointPmf,
    side: Vec<String>,
    outputs: Vec<String>,
}

impl<'a> MacModel<'a> {
    pub fn new(prob: &'a HypothesisProblem, aux: &'a MacAux) -> Result<Self> {
        require_mac(prob)?;
        aux.check(prob)?;
        let side: Vec<String> = prob.side_axes().into_iter().map(String::from).collect();
        let outputs: Vec<String> = prob.channel.outputs().iter().map(|a| a.name.clone()).collect();
        let mut model = Self { prob, aux, joint: prob.p.clone(), side, outputs };
        model.joint = model.full_law(&prob.p)?;
        Ok(model)
    }

    fn names(&self, roles: &[Role]) -> Vec<&str> {
        let mut out = Vec::new();
        for r in roles {
            match r {
                S1 => out.push("S1"),
                S2 => out.push("S2"),
                X1 => out.push("X1"),
                X2 => out.push("X2"),
                T => out.extend(["T1", "T2"]),
                Y => out.extend(self.side.iter().map(String::as_str)),
                V => out.extend(self.outputs.iter().map(String::as_str)),
            }
        }
        out
    }

    fn gamma_row(&self, w1: usize, w2: usize) -> &[f64] {
        let ch = &self.prob.channel;
        let d = Dims::of(self.prob).expect("checked");
        let idx = if ch.inputs()[0].name == "W1" { w1 * d.w2 + w2 } else { w2 * d.w1 + w1 };
        ch.row(idx)
    }

    /// Channel from the listed inputs to the channel outputs, with the
    /// channel inputs `(w1, w2)` computed from an input index.
    fn induced(&self, inputs: Vec<Alphabet>, w: impl Fn(&[usize]) -> (usize, usize)) -> Result<Channel> {
        let sizes: Vec<usize> = inputs.iter().map(|a| a.size).collect();
        let total: usize = sizes.iter().product();
        let mut kernel = Vec::new();
        let mut idx = vec![0; sizes.len()];
        for flat in 0..total {
            let mut rem = flat;
            for k in (0..sizes.len()).rev() {
                idx[k] = rem % sizes[k];
                rem /= sizes[k];
            }
            let (w1, w2) = w(&idx);
            kernel.extend_from_slice(self.gamma_row(w1, w2));
        }
        Channel::new(inputs, self.prob.channel.outputs().to_vec(), kernel)
    }

    fn s_sizes(&self) -> (usize, usize) {
        self.aux.s_sizes()
    }

    fn full_law(&self, sources: &JointPmf) -> Result<JointPmf> {
        let d = Dims::of(self.prob)?;
        let (ns1, ns2) = self.s_sizes();
        let g = self.induced(
            vec![
                Alphabet::new("S1", ns1),
                Alphabet::new("S2", ns2),
                Alphabet::new("X1", d.x1),
                Alphabet::new("X2", d.x2),
            ],
            |i| (self.aux.f1[i[0] * d.x1 + i[2]], self.aux.f2[i[1] * d.x2 + i[3]]),
        )?;
        self.aux.t.product(sources)?.compose(&self.aux.s1)?.compose(&self.aux.s2)?.compose(&g)
    }

    fn reference(&self, kind: Reference) -> Result<JointPmf> {
        let d = Dims::of(self.prob)?;
        let (ns1, ns2) = self.s_sizes();
        let q = &self.prob.q;
        let t = &self.aux.t;
        match kind {
            Reference::Full => self.full_law(q),
            Reference::FallbackOne => {
                let g = self.induced(
                    vec![Alphabet::new("T1", d.w1), Alphabet::new("S2", ns2), Alphabet::new("X2", d.x2)],
                    |i| (i[0], self.aux.f2[i[1] * d.x2 + i[2]]),
                )?;
                t.product(&q.marginal(&self.names(&[X2, Y]))?)?.compose(&self.aux.s2)?.compose(&g)
            }
            Reference::FallbackTwo => {
                let g = self.induced(
                    vec![Alphabet::new("S1", ns1), Alphabet::new("X1", d.x1), Alphabet::new("T2", d.w2)],
                    |i| (self.aux.f1[i[0] * d.x1 + i[1]], i[2]),
                )?;
                t.product(&q.marginal(&self.names(&[X1, Y]))?)?.compose(&self.aux.s1)?.compose(&g)
            }
            Reference::FallbackBoth => {
                let g = self.induced(vec![Alphabet::new("T1", d.w1), Alphabet::new("T2", d.w2)], |i| (i[0], i[1]))?;
                t.product(&q.marginal(&self.names(&[Y]))?)?.compose(&g)
            }
        }
    }

    fn info(&self, a: &[Role], b: &[Role], given: &[Role]) -> Result<f64> {
        mutual_information(&self.joint, &self.names(a), &self.names(b), &self.names(given))
    }

    fn offset(&self, kind: Offset) -> Result<f64> {
        Ok(match kind {
            Offset::One => self.info(&[S1], &[Y, V], &[S2, T])? - self.info(&[S1], &[X1], &[S2, T])?,
            Offset::Two => self.info(&[S2], &[Y, V], &[S1, T])? - self.info(&[S2], &[X2], &[S1, T])?,
            Offset::Both => self.info(&[S1, S2], &[Y, V], &[T])? - self.info(&[S1, S2], &[X1, X2], &[T])?,
            Offset::Zero => 0.0,
        })
    }

    fn problem(&self, pat: &Pattern) -> Result<CouplingProblem> {
        let mut cp = CouplingProblem::new(self.reference(pat.reference)?);
        for m in pat.marginals {
            cp = cp.with_marginal(self.joint.marginal(&self.names(m))?);
        }
        if let Some((target, given)) = pat.entropy {
            let (a, b) = (self.names(target), self.names(given));
            let bound = conditional_entropy(&self.joint, &a, &b)?;
            cp = cp.with_entropy(EntropyConstraint::new(&a, &b, bound));
        }
        Ok(cp)
    }

    /// The three rate conditions as `(left, right)` pairs.
    pub fn rate_conditions(&self) -> Result<[(f64, f64); 3]> {
        Ok([
            (self.info(&[S1], &[X1], &[T])?, self.info(&[S1], &[S2, Y, V], &[T])?),
            (self.info(&[S2], &[X2], &[T])?, self.info(&[S2], &[S1, Y, V], &[T])?),
            (self.info(&[S1, S2], &[X1, X2], &[T])?, self.info(&[S1, S2], &[Y, V], &[T])?),
        ])
    }
}

pub(crate) fn require_mac(prob: &HypothesisProblem) -> Result<()> {
    if prob.variant != Variant::Mac {
        return Err(Error::InvalidArgument("expected a multiple-access problem".into()));
    }
    prob.validate()
}

/// The I-projection behind every component, in table order.
pub fn component_problems(prob: &HypothesisProblem, aux: &MacAux) -> Result<Vec<(MacComponent, CouplingProblem)>> {
    let model = MacModel::new(prob, aux)?;
    PATTERNS.iter().map(|p| Ok((p.component, model.problem(p)?))).collect()
}

#[derive(Clone, Debug)]
pub struct MacComponentValue {
    /// Optimal value of the I-projection.
    pub divergence: f64,
    /// Mutual-information offset added to it.
    pub offset: f64,
    pub value: f64,
    pub coupling: SolveReport,
}

#[derive(Clone, Debug)]
pub struct MacReport {
    pub theta: f64,
    pub components: BTreeMap<MacComponent, MacComponentValue>,
    pub active: MacComponent,
    pub feasible: bool,
    /// `(left, right)` of the three rate conditions.
    pub rate_conditions: [(f64, f64); 3],
}

impl MacReport {
    pub fn value(&self, c: MacComponent) -> f64 {
        self.components[&c].value
    }

    pub fn exponent_report(&self) -> ExponentReport {
        let pairs: Vec<(&str, f64)> = self.components.iter().map(|(c, v)| (c.name(), v.value)).collect();
        ExponentReport::from_components(&pairs, self.feasible)
    }
}

/// All nine components for one auxiliary choice.
pub fn mac_exponents(prob: &HypothesisProblem, aux: &MacAux) -> Result<MacReport> {
    mac_exponents_with(prob, aux, InnerSolver::Barrier, SOLVER_TOL)
}

pub fn mac_exponents_with(prob: &HypothesisProblem, aux: &MacAux, solver: InnerSolver, tol: f64) -> Result<MacReport> {
    let model = MacModel::new(prob, aux)?;
    let rate_conditions = model.rate_conditions()?;
    let feasible = rate_conditions.iter().all(|(l, r)| *l <= r + FEASIBILITY_SLACK);
    let values: Vec<(MacComponent, MacComponentValue)> = PATTERNS
        .par_iter()
        .map(|pat| -> Result<_> {
            let cp = model.problem(pat)?;
            let coupling = match solver {
                InnerSolver::Barrier => solve(&cp, tol)?,
                InnerSolver::Penalty => solve_penalty(&cp, tol)?,
            };
            let offset = model.offset(pat.offset)?;
            let divergence = coupling.value;
            Ok((pat.component, MacComponentValue { divergence, offset, value: divergence + offset, coupling }))
        })
        .collect::<Result<_>>()?;
    let (active, theta) = values
        .iter()
        .fold((MacComponent::Standard, f64::INFINITY), |acc, (c, v)| if v.value < acc.1 { (*c, v.value) } else { acc });
    Ok(MacReport { theta, components: values.into_iter().collect(), active, feasible, rate_conditions })
}

#[cfg(test)]
mod tests;
