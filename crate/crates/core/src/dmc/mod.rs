//! Point-to-point testing over a noisy channel: the achievable exponent of
//! the binning + unequal-error-protection scheme, its outer maximization,
//! the variant without UEP, and the optimal exponent for generalized testing
//! against conditional independence.
//!
//! The joint law under `H = 0` is `P_{S|X} P_{XY} P_T P_{W|T} G_{V|W}`, where
//! `T` takes values in the channel input alphabet and marks the fallback
//! sequence sent when quantization fails.

mod eval;
mod gtci;

pub use gtci::{gtci_optimal, gtci_optimize, GtciOptimum, STRUCTURE_TOL};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iproject::{solve, CouplingProblem, EntropyConstraint, SolveReport};
use crate::probkit::{
    binary_entropy, bernoulli, bsc, channel_capacity, conditional_entropy, kl_divergence, mutual_information,
    Alphabet, Channel, JointPmf,
};
use crate::problem::{ExponentReport, HypothesisProblem, Variant};
use crate::search::{dirichlet_rows, logits_from_rows, maximize, polish, softmax_rows, SearchBudget};

pub(crate) use eval::Evaluator;

/// Accuracy requested from the inner I-projections, in bits.
pub const SOLVER_TOL: f64 = 1e-9;
/// Slack on the rate condition `I(S;X|Y) <= I(W;V|T)`.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

/// Auxiliary choices: quantizer `P_{S|X}`, time-sharing law `P_T` on the
/// channel input alphabet, and channel code law `P_{W|T}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DmcAux {
    pub s_given_x: Channel,
    pub t: JointPmf,
    pub w_given_t: Channel,
}

impl DmcAux {
    pub fn from_rows(s_rows: &[Vec<f64>], t: &[f64], w_rows: &[Vec<f64>]) -> Result<Self> {
        let nx = s_rows.len();
        let ns = s_rows.first().map_or(0, |r| r.len());
        let nw = t.len();
        Ok(Self {
            s_given_x: Channel::from_rows(vec![Alphabet::new("X", nx)], vec![Alphabet::new("S", ns)], s_rows)?,
            t: JointPmf::new(vec![Alphabet::new("T", nw)], t.to_vec())?,
            w_given_t: Channel::from_rows(vec![Alphabet::new("T", nw)], vec![Alphabet::new("W", nw)], w_rows)?,
        })
    }

    pub fn s_rows(&self) -> Vec<Vec<f64>> {
        self.s_given_x.rows().map(|r| r.to_vec()).collect()
    }

    pub fn w_rows(&self) -> Vec<Vec<f64>> {
        self.w_given_t.rows().map(|r| r.to_vec()).collect()
    }

    pub fn s_size(&self) -> usize {
        self.s_given_x.output_len()
    }

    pub fn check(&self, prob: &HypothesisProblem) -> Result<()> {
        let nx = prob.p.size_of("X")?;
        let nw = prob.channel.input_len();
        let ok = self.s_given_x.inputs() == [Alphabet::new("X", nx)]
            && self.s_given_x.outputs().len() == 1
            && self.s_given_x.outputs()[0].name == "S"
            && self.t.axes() == [Alphabet::new("T", nw)]
            && self.w_given_t.inputs() == [Alphabet::new("T", nw)]
            && self.w_given_t.outputs() == [Alphabet::new("W", nw)];
        if ok {
            Ok(())
        } else {
            Err(Error::AxisMismatch(
                "auxiliary needs S|X, T over the channel input alphabet, and W|T".into(),
            ))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmcComponent {
    Standard,
    Dec,
    Miss,
    MissNoUep,
}

impl DmcComponent {
    pub const UEP: [DmcComponent; 3] = [Self::Standard, Self::Dec, Self::Miss];
    pub const NO_UEP: [DmcComponent; 2] = [Self::Standard, Self::MissNoUep];

    pub fn name(self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Dec => "dec",
            Self::Miss => "miss",
            Self::MissNoUep => "miss_no_uep",
        }
    }
}

/// Which rate condition an auxiliary must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DmcScheme {
    /// `I(S;X|Y) <= I(W;V|T)`.
    Uep,
    /// `I(S;X|Y) <= I(W;V)`: no special fallback input.
    NoUep,
}

#[derive(Clone, Debug)]
pub struct DmcReport {
    pub theta: f64,
    pub theta_no_uep: f64,
    pub standard: f64,
    pub dec: f64,
    pub miss: f64,
    pub miss_no_uep: f64,
    pub active: DmcComponent,
    pub feasible: bool,
    pub feasible_no_uep: bool,
    /// `I(S;X|Y)`.
    pub source_rate: f64,
    /// `I(W;V|T)`.
    pub channel_rate: f64,
    /// `I(W;V)`.
    pub channel_rate_no_uep: f64,
    pub standard_coupling: SolveReport,
    pub dec_coupling: SolveReport,
}

impl DmcReport {
    pub fn value(&self, c: DmcComponent) -> f64 {
        match c {
            DmcComponent::Standard => self.standard,
            DmcComponent::Dec => self.dec,
            DmcComponent::Miss => self.miss,
            DmcComponent::MissNoUep => self.miss_no_uep,
        }
    }

    pub fn min_over(&self, set: &[DmcComponent]) -> f64 {
        set.iter().map(|&c| self.value(c)).fold(f64::INFINITY, f64::min)
    }

    pub fn exponent_report(&self) -> ExponentReport {
        ExponentReport::from_components(
            &[("standard", self.standard), ("dec", self.dec), ("miss", self.miss)],
            self.feasible,
        )
    }

    pub fn no_uep_report(&self) -> ExponentReport {
        ExponentReport::from_components(
            &[("standard", self.standard), ("miss_no_uep", self.miss_no_uep)],
            self.feasible_no_uep,
        )
    }
}

pub(crate) fn require_dmc(prob: &HypothesisProblem) -> Result<()> {
    if prob.variant != Variant::Dmc {
        return Err(Error::InvalidArgument("expected a point-to-point problem".into()));
    }
    prob.validate()
}

fn coupling_problems(p_sxy: &JointPmf, reference: JointPmf) -> Result<[CouplingProblem; 3]> {
    let h_sy = conditional_entropy(p_sxy, &["S"], &["Y"])?;
    let sx = p_sxy.marginal(&["S", "X"])?;
    let y = p_sxy.marginal(&["Y"])?;
    Ok([
        CouplingProblem::new(reference.clone()).with_marginal(sx.clone()).with_marginal(p_sxy.marginal(&["S", "Y"])?),
        CouplingProblem::new(reference.clone())
            .with_marginal(sx)
            .with_marginal(y.clone())
            .with_entropy(EntropyConstraint::new(&["S"], &["Y"], h_sy)),
        CouplingProblem::new(reference).with_marginal(y),
    ])
}

/// The I-projections behind the standard, dec and miss components. The
/// miss entry only fixes the `Y` marginal, so its optimum is
/// `D(P_Y || Q_Y)`, the divergence term of the miss component.
pub fn dmc_component_problems(prob: &HypothesisProblem, aux: &DmcAux) -> Result<Vec<(DmcComponent, CouplingProblem)>> {
    require_dmc(prob)?;
    aux.check(prob)?;
    let p_sxy = prob.p.compose(&aux.s_given_x)?;
    let [a, b, c] = coupling_problems(&p_sxy, prob.q.compose(&aux.s_given_x)?)?;
    Ok(vec![(DmcComponent::Standard, a), (DmcComponent::Dec, b), (DmcComponent::Miss, c)])
}

/// All exponent components for one auxiliary choice.
pub fn dmc_exponents(prob: &HypothesisProblem, aux: &DmcAux) -> Result<DmcReport> {
    require_dmc(prob)?;
    aux.check(prob)?;
    let p_sxy = prob.p.compose(&aux.s_given_x)?;
    let reference = prob.q.compose(&aux.s_given_x)?;
    let p_twv = aux.t.compose(&aux.w_given_t)?.compose(&prob.channel)?;

    let source_rate = mutual_information(&p_sxy, &["S"], &["X"], &["Y"])?;
    let channel_rate = mutual_information(&p_twv, &["W"], &["V"], &["T"])?;
    let channel_rate_no_uep = mutual_information(&p_twv, &["W"], &["V"], &[])?;
    let d_y = kl_divergence(&prob.p.marginal(&["Y"])?, &prob.q.marginal(&["Y"])?)?;

    let [std_problem, dec_problem, _] = coupling_problems(&p_sxy, reference)?;
    let standard_coupling = solve(&std_problem, SOLVER_TOL)?;
    let dec_coupling = solve(&dec_problem, SOLVER_TOL)?;

    // Sum over t of P_T(t) D(P_{V|T=t} || G_{V|W=t}).
    let v_given_t = p_twv.conditional(&["V"], &["T"])?;
    let mut unprotected = 0.0;
    for (t, &pt) in aux.t.probs().iter().enumerate() {
        if pt > 0.0 {
            unprotected += pt * crate::probkit::kl_of(v_given_t.row(t), prob.channel.row(t));
        }
    }

    let standard = standard_coupling.value;
    let dec = dec_coupling.value + channel_rate - source_rate;
    let miss = d_y + channel_rate - source_rate + unprotected;
    let miss_no_uep = d_y + channel_rate_no_uep - source_rate;
    let (active, theta) = DmcComponent::UEP
        .iter()
        .map(|&c| (c, [standard, dec, miss][c as usize]))
        .fold((DmcComponent::Standard, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    Ok(DmcReport {
        theta,
        theta_no_uep: standard.min(miss_no_uep),
        standard,
        dec,
        miss,
        miss_no_uep,
        active,
        feasible: source_rate <= channel_rate + FEASIBILITY_SLACK,
        feasible_no_uep: source_rate <= channel_rate_no_uep + FEASIBILITY_SLACK,
        source_rate,
        channel_rate,
        channel_rate_no_uep,
        standard_coupling,
        dec_coupling,
    })
}

/// `(1 - 2r) log2((1 - r) / r)`: the exponent of the binary example when
/// only the unprotected-miss event matters.
pub fn bsc_closed_form(r: f64) -> f64 {
    (1.0 - 2.0 * r) * ((1.0 - r) / r).log2()
}

/// Binary example: under `H = 0`, `X ~ Bern(p0)` and `Y = X xor Bern(q0)`;
/// under `H = 1`, `X ~ Bern(p1)` independent of `Y`, which keeps its
/// `H = 0` marginal. The channel is a BSC with crossover `r`.
pub fn binary_example(p0: f64, q0: f64, p1: f64, r: f64) -> Result<HypothesisProblem> {
    let p = bernoulli("X", p0)?.compose(&bsc("X", "Y", q0)?)?;
    let py1 = p0 * (1.0 - q0) + (1.0 - p0) * q0;
    let q = bernoulli("X", p1)?.product(&bernoulli("Y", py1)?)?;
    HypothesisProblem::new(p, q, bsc("W", "V", r)?, Variant::Dmc)
}

/// Result of an outer search over auxiliary choices.
#[derive(Clone, Debug)]
pub struct DmcOptimum {
    /// Minimum over the searched components at the returned auxiliary.
    pub value: f64,
    pub report: DmcReport,
    pub aux: DmcAux,
    pub scheme: DmcScheme,
    pub components: Vec<DmcComponent>,
    pub evaluations: usize,
    pub start_values: Vec<f64>,
}

impl DmcOptimum {
    pub fn feasible(&self) -> bool {
        match self.scheme {
            DmcScheme::Uep => self.report.feasible,
            DmcScheme::NoUep => self.report.feasible_no_uep,
        }
    }
}

/// Maximizes `min(standard, dec, miss)` over auxiliary choices with
/// `|S| = |X| + 2`.
pub fn dmc_optimize(prob: &HypothesisProblem, budget: &SearchBudget) -> Result<DmcOptimum> {
    dmc_optimize_over(prob, DmcScheme::Uep, &DmcComponent::UEP, budget)
}

/// Maximizes `min(standard, D(P_Y||Q_Y) + I(V;W) - I(S;X|Y))`, the exponent
/// without the protected fallback input.
pub fn dmc_no_uep(prob: &HypothesisProblem, budget: &SearchBudget) -> Result<DmcOptimum> {
    dmc_optimize_over(prob, DmcScheme::NoUep, &DmcComponent::NO_UEP, budget)
}

struct Layout {
    nx: usize,
    ns: usize,
    nw: usize,
}

impl Layout {
    fn dim(&self) -> usize {
        self.nx * (self.ns - 1) + (self.nw - 1) + self.nw * (self.nw - 1)
    }

    fn split(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
        let a = self.nx * (self.ns - 1);
        let b = a + self.nw - 1;
        let s = softmax_rows(&x[..a], self.nx, self.ns);
        let t = softmax_rows(&x[a..b], 1, self.nw).remove(0);
        let w = softmax_rows(&x[b..], self.nw, self.nw);
        (s, t, w)
    }

    fn join(&self, s: &[Vec<f64>], t: &[f64], w: &[Vec<f64>]) -> Vec<f64> {
        let mut out = logits_from_rows(s);
        out.extend(logits_from_rows(&[t.to_vec()]));
        out.extend(logits_from_rows(w));
        out
    }
}

fn near_point(n: usize, k: usize) -> Vec<f64> {
    let eps = 1e-7;
    (0..n).map(|i| if i == k { 1.0 - eps * (n - 1) as f64 } else { eps }).collect()
}

fn anchors(prob: &HypothesisProblem, layout: &Layout) -> Result<Vec<Vec<f64>>> {
    let (nx, ns, nw) = (layout.nx, layout.ns, layout.nw);
    let cap = crate::probkit::blahut_arimoto(&prob.channel, 1e-9)?.input;
    let cap: Vec<f64> = cap.iter().map(|v| v.max(1e-9)).collect();
    let cs: f64 = cap.iter().sum();
    let cap: Vec<f64> = cap.into_iter().map(|v| v / cs).collect();
    let uniform_t = vec![1.0 / nw as f64; nw];
    let sources: Vec<Vec<Vec<f64>>> = vec![
        (0..nx).map(|x| near_point(ns, x)).collect(),
        (0..nx).map(|_| near_point(ns, 0)).collect(),
        (0..nx)
            .map(|x| (0..ns).map(|s| if s == x { 0.7 } else { 0.3 / (ns - 1) as f64 }).collect())
            .collect(),
    ];
    let channels: Vec<(Vec<f64>, Vec<Vec<f64>>)> = vec![
        (uniform_t.clone(), vec![cap.clone(); nw]),
        (uniform_t, (0..nw).map(|t| near_point(nw, (t + 1) % nw)).collect()),
        (near_point(nw, 0), vec![cap; nw]),
    ];
    let mut out = Vec::new();
    for s in &sources {
        for (t, w) in &channels {
            out.push(layout.join(s, t, w));
        }
    }
    Ok(out)
}

/// Outer search over auxiliary choices for the minimum over `components`
/// under the rate condition of `scheme`. Infeasible candidates are repaired
/// by mixing `P_{S|X}` towards its `S` marginal until the condition holds.
pub fn dmc_optimize_over(
    prob: &HypothesisProblem,
    scheme: DmcScheme,
    components: &[DmcComponent],
    budget: &SearchBudget,
) -> Result<DmcOptimum> {
    dmc_optimize_seeded(prob, scheme, components, budget, &[])
}

/// [`dmc_optimize_over`] with extra starting auxiliaries, which must use
/// `|S| = |X| + 2`.
pub fn dmc_optimize_seeded(
    prob: &HypothesisProblem,
    scheme: DmcScheme,
    components: &[DmcComponent],
    budget: &SearchBudget,
    seeds: &[DmcAux],
) -> Result<DmcOptimum> {
    require_dmc(prob)?;
    if components.is_empty() {
        return Err(Error::InvalidArgument("no components to optimize".into()));
    }
    if budget.starts == 0 && budget.evals_per_start == 0 {
        return Err(Error::BudgetExhausted("empty search budget".into()));
    }
    let nx = prob.p.size_of("X")?;
    let nw = prob.channel.input_len();
    if prob.channel.output_len() < 1 || nw < 1 {
        return Err(Error::InvalidArgument("empty channel".into()));
    }
    let layout = Layout { nx, ns: nx + 2, nw };
    let eval = Evaluator::new(prob, layout.ns)?;
    let objective = |x: &[f64]| {
        let (s, t, w) = layout.split(x);
        eval.objective(&s, &t, &w, scheme, components).unwrap_or(f64::NEG_INFINITY)
    };
    let init = |rng: &mut rand_chacha::ChaCha8Rng| {
        let s = dirichlet_rows(rng, nx, layout.ns, 1.0);
        let t = dirichlet_rows(rng, 1, nw, 1.0).remove(0);
        let w = dirichlet_rows(rng, nw, nw, 1.0);
        layout.join(&s, &t, &w)
    };
    let mut anchor_points = if layout.dim() > 0 { anchors(prob, &layout)? } else { vec![Vec::new()] };
    for aux in seeds {
        aux.check(prob)?;
        if aux.s_size() != layout.ns {
            return Err(Error::AxisMismatch(format!("seed auxiliary needs |S| = {}", layout.ns)));
        }
        anchor_points.push(layout.join(&aux.s_rows(), aux.t.probs(), &aux.w_rows()));
    }
    let mut out = maximize(&objective, &anchor_points, &init, budget);
    if !out.value.is_finite() && out.value < 0.0 {
        return Err(Error::BudgetExhausted("no feasible auxiliary found".into()));
    }
    let (point, value, used) = polish(&objective, out.point.clone(), budget.evals_per_start, 0.05);
    out.evaluations += used;
    if value > out.value {
        out.point = point;
    }
    let (s, t, w) = layout.split(&out.point);
    let s = eval.repair(&s, &t, &w, scheme);
    let aux = DmcAux::from_rows(&s, &t, &w)?;
    let report = dmc_exponents(prob, &aux)?;
    Ok(DmcOptimum {
        value: report.min_over(components),
        report,
        aux,
        scheme,
        components: components.to_vec(),
        evaluations: out.evaluations,
        start_values: out.start_values,
    })
}

/// Capacity of the problem's channel in bits.
pub fn capacity(prob: &HypothesisProblem) -> Result<f64> {
    channel_capacity(&prob.channel, 1e-12)
}

/// `H(X)` of a binary source, exposed for regime analysis of the example.
pub fn binary_source_entropy(p0: f64) -> f64 {
    binary_entropy(p0)
}

#[cfg(test)]
mod tests;
