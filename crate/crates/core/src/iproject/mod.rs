//! Constrained I-projections: minimize `D(pi || R)` over joint pmfs `pi`
//! with prescribed marginals and an optional lower bound on a conditional
//! entropy `H_pi(A|B)`.
//!
//! [`solve`] runs iterative proportional fitting (exact when the entropy
//! bound is slack) followed by a log-barrier Newton method in null-space
//! coordinates when the bound is active. [`solve_penalty`] reaches the same
//! optimum through a smoothed exact penalty started from the maximum-entropy
//! feasible point. [`brute_force`] is a lattice oracle for small instances.

mod brute;
mod ipf;
mod linalg;
mod newton;

pub use brute::{brute_force, brute_force_anchored, brute_force_refined, BruteForceReport};

use serde::Serialize;

use crate::error::{Error, Result};
use std::f64::consts::LN_2;

use crate::probkit::{entropy_of, index_map, kl_of, positions_of, JointPmf};

/// Residual above which an IPF run is declared non-convergent.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Sweep budget for IPF.
pub const IPF_SWEEPS: usize = 10_000;
/// Largest support handled by the dense Newton phase.
pub const MAX_NEWTON_SUPPORT: usize = 4096;

/// `pi_{axes} = target`.
#[derive(Clone, Debug)]
pub struct MarginalConstraint {
    pub target: JointPmf,
}

impl MarginalConstraint {
    pub fn new(target: JointPmf) -> Self {
        Self { target }
    }

    /// Marginal of `law` on `axes`, used as the target.
    pub fn from_law(law: &JointPmf, axes: &[&str]) -> Result<Self> {
        Ok(Self { target: law.marginal(axes)? })
    }
}

/// `H_pi(target | given) >= bound` (bits).
#[derive(Clone, Debug)]
pub struct EntropyConstraint {
    pub target: Vec<String>,
    pub given: Vec<String>,
    pub bound: f64,
}

impl EntropyConstraint {
    pub fn new(target: &[&str], given: &[&str], bound: f64) -> Self {
        Self {
            target: target.iter().map(|s| s.to_string()).collect(),
            given: given.iter().map(|s| s.to_string()).collect(),
            bound,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CouplingProblem {
    pub reference: JointPmf,
    pub marginals: Vec<MarginalConstraint>,
    pub entropy: Option<EntropyConstraint>,
}

impl CouplingProblem {
    pub fn new(reference: JointPmf) -> Self {
        Self { reference, marginals: Vec::new(), entropy: None }
    }

    pub fn with_marginal(mut self, target: JointPmf) -> Self {
        self.marginals.push(MarginalConstraint::new(target));
        self
    }

    pub fn with_entropy(mut self, c: EntropyConstraint) -> Self {
        self.entropy = Some(c);
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    /// Optimal value in bits; `+inf` when every feasible point puts mass
    /// outside the reference support, `+inf` as well when `feasible` is false.
    pub value: f64,
    pub argmin: JointPmf,
    pub iterations: usize,
    /// Primal residual, plus the reduced Lagrangian gradient norm when the
    /// entropy bound is active.
    pub kkt_residual: f64,
    pub feasible: bool,
}

#[derive(Clone)]
pub(crate) struct Block {
    pub map: Vec<usize>,
    pub target: Vec<f64>,
}

#[derive(Clone)]
pub(crate) struct EntropyTerm {
    pub ab_map: Vec<usize>,
    pub b_map: Vec<usize>,
    pub n_ab: usize,
    pub n_b: usize,
    /// Bound in nats.
    pub bound: f64,
    pub max_value_bits: f64,
}

#[derive(Clone)]
pub(crate) struct Compiled {
    pub reference: Vec<f64>,
    pub blocks: Vec<Block>,
    pub entropy: Option<EntropyTerm>,
}

impl Compiled {
    pub fn new(problem: &CouplingProblem) -> Result<Self> {
        let r = &problem.reference;
        let axes = r.axes();
        let mut blocks = Vec::new();
        for m in &problem.marginals {
            let names = m.target.axis_names();
            let pos = positions_of(axes, &names)?;
            for (a, &p) in m.target.axes().iter().zip(&pos) {
                if axes[p].size != a.size {
                    return Err(Error::AxisMismatch(format!(
                        "constraint axis `{}` has size {}, reference has {}",
                        a.name, a.size, axes[p].size
                    )));
                }
            }
            blocks.push(Block { map: index_map(axes, &pos), target: m.target.probs().to_vec() });
        }
        let entropy = match &problem.entropy {
            None => None,
            Some(e) => {
                let t: Vec<&str> = e.target.iter().map(String::as_str).collect();
                let g: Vec<&str> = e.given.iter().map(String::as_str).collect();
                if t.is_empty() {
                    return Err(Error::InvalidArgument("entropy constraint has no target axes".into()));
                }
                if let Some(x) = t.iter().find(|x| g.contains(x)) {
                    return Err(Error::OverlappingAxes(x.to_string()));
                }
                let ab: Vec<&str> = t.iter().chain(&g).copied().collect();
                let ab_pos = positions_of(axes, &ab)?;
                let b_pos = positions_of(axes, &g)?;
                let n_b: usize = b_pos.iter().map(|&p| axes[p].size).product();
                let n_a: usize = positions_of(axes, &t)?.iter().map(|&p| axes[p].size).product();
                if !e.bound.is_finite() {
                    return Err(Error::InvalidArgument("entropy bound must be finite".into()));
                }
                Some(EntropyTerm {
                    ab_map: index_map(axes, &ab_pos),
                    b_map: index_map(axes, &b_pos),
                    n_ab: n_a * n_b,
                    n_b,
                    bound: e.bound * std::f64::consts::LN_2,
                    max_value_bits: (n_a as f64).log2(),
                })
            }
        };
        Ok(Self { reference: r.probs().to_vec(), blocks, entropy })
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    /// Entries not forced to zero by a zero target cell.
    pub fn allowed(&self) -> Vec<bool> {
        (0..self.len())
            .map(|x| self.blocks.iter().all(|b| b.target[b.map[x]] > 0.0))
            .collect()
    }

    pub fn residual(&self, pi: &[f64]) -> f64 {
        ipf::residual(pi, &self.blocks)
    }
}

impl EntropyTerm {
    /// `H(A|B)` in nats for a full-length vector.
    pub fn value(&self, pi: &[f64]) -> f64 {
        let mut ab = vec![0.0; self.n_ab];
        let mut b = vec![0.0; self.n_b];
        for (x, &p) in pi.iter().enumerate() {
            ab[self.ab_map[x]] += p;
            b[self.b_map[x]] += p;
        }
        (entropy_of(&ab) - entropy_of(&b)) * std::f64::consts::LN_2
    }
}

/// Solver output before it is wrapped into a [`SolveReport`].
pub(crate) struct Raw {
    pub pi: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub kkt: f64,
    pub feasible: bool,
}

impl Raw {
    fn new(pi: Vec<f64>, value: f64, iterations: usize, kkt: f64, feasible: bool) -> Self {
        Self { pi, value, iterations, kkt, feasible }
    }

    fn into_report(self, c: &Compiled, reference: &JointPmf) -> SolveReport {
        let residual = if self.feasible { c.residual(&self.pi) } else { 0.0 };
        SolveReport {
            value: self.value,
            argmin: JointPmf::from_parts(reference.axes().to_vec(), self.pi),
            iterations: self.iterations,
            kkt_residual: residual.max(self.kkt),
            feasible: self.feasible,
        }
    }
}

fn masked_start(weights: &[f64], mask: &[bool]) -> Vec<f64> {
    let mut v: Vec<f64> = weights.iter().zip(mask).map(|(&w, &m)| if m { w } else { 0.0 }).collect();
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

/// Outcome of the common preprocessing shared by both solvers.
enum Prepared {
    Infeasible(Vec<f64>, usize),
    /// Feasible, but no feasible point is absolutely continuous w.r.t. R.
    Unbounded(Vec<f64>, usize),
    /// IPF projection of R on `support` (exact when no entropy bound binds).
    Ready { projection: Vec<f64>, support: Vec<bool>, iterations: usize },
}

fn prepare(c: &Compiled) -> Prepared {
    let allowed = c.allowed();
    let support: Vec<bool> = allowed.iter().zip(&c.reference).map(|(&a, &r)| a && r > 0.0).collect();
    let mut proj = masked_start(&c.reference, &support);
    let (it, res) = ipf::run(&mut proj, &c.blocks, IPF_SWEEPS);
    if res <= FEASIBILITY_TOL && proj.iter().sum::<f64>() > 0.0 {
        return Prepared::Ready { projection: proj, support, iterations: it };
    }
    // Either infeasible, or feasible only with mass where R vanishes.
    let mut me = masked_start(&vec![1.0; c.len()], &allowed);
    let (it2, res2) = ipf::run(&mut me, &c.blocks, IPF_SWEEPS);
    if res2 > FEASIBILITY_TOL || me.iter().sum::<f64>() <= 0.0 {
        Prepared::Infeasible(me, it + it2)
    } else {
        Prepared::Unbounded(me, it + it2)
    }
}

fn max_entropy_point(c: &Compiled, support: &[bool], fallback: &[f64]) -> Vec<f64> {
    let mut me = masked_start(&vec![1.0; c.len()], support);
    let (_, res) = ipf::run(&mut me, &c.blocks, IPF_SWEEPS);
    if res <= FEASIBILITY_TOL {
        me
    } else {
        fallback.to_vec()
    }
}

/// Entropy-bound handling when the bound cuts off the projection: a
/// strictly feasible point on `support`, or why none exists.
enum StartPoint {
    Interior(Vec<f64>),
    /// Best point found has `H(A|B)` within tolerance of the bound.
    Boundary(Vec<f64>),
    None,
}

fn feasible_start(c: &Compiled, term: &EntropyTerm, from: &[f64], support: &[bool], iterations: &mut usize) -> Result<StartPoint> {
    let red = newton::Reduced::new(c, support)?;
    let target = term.bound + 1e-9;
    let (pt, its) = red.maximize_entropy(&red.restrict(from), target);
    *iterations += its;
    let pt = red.expand(&pt);
    let h = term.value(&pt);
    Ok(if h >= target {
        StartPoint::Interior(pt)
    } else if h >= term.bound - 1e-9 {
        StartPoint::Boundary(pt)
    } else {
        StartPoint::None
    })
}

fn entropy_reachable(c: &Compiled, term: &EntropyTerm, feasible_point: &[f64]) -> Result<bool> {
    if term.value(feasible_point) >= term.bound - 1e-12 {
        return Ok(true);
    }
    if term.bound / LN_2 > term.max_value_bits + 1e-12 {
        return Ok(false);
    }
    let allowed = c.allowed();
    let mut its = 0;
    Ok(!matches!(feasible_start(c, term, feasible_point, &allowed, &mut its)?, StartPoint::None))
}

fn unbounded(c: &Compiled, p: Vec<f64>, its: usize) -> Result<Raw> {
    let feasible = match &c.entropy {
        None => true,
        Some(t) => entropy_reachable(c, t, &p)?,
    };
    Ok(Raw::new(p, f64::INFINITY, its, 0.0, feasible))
}

pub(crate) fn solve_compiled(c: &Compiled, tol: f64) -> Result<Raw> {
    let (proj, support, mut its) = match prepare(c) {
        Prepared::Infeasible(p, it) => return Ok(Raw::new(p, f64::INFINITY, it, 0.0, false)),
        Prepared::Unbounded(p, it) => return unbounded(c, p, it),
        Prepared::Ready { projection, support, iterations } => (projection, support, iterations),
    };
    let term = match &c.entropy {
        Some(t) if t.value(&proj) < t.bound - 1e-12 => t,
        _ => {
            let v = kl_of(&proj, &c.reference);
            return Ok(Raw::new(proj, v, its, 0.0, true));
        }
    };
    if term.bound / LN_2 > term.max_value_bits + 1e-12 {
        return Ok(Raw::new(proj, f64::INFINITY, its, 0.0, false));
    }
    let me = max_entropy_point(c, &support, &proj);
    let start = match feasible_start(c, term, &me, &support, &mut its)? {
        StartPoint::Interior(p) => p,
        StartPoint::Boundary(p) => {
            let v = kl_of(&p, &c.reference);
            return Ok(Raw::new(p, v, its, 0.0, true));
        }
        StartPoint::None => {
            // Not reachable on the reference support; check the wider set.
            let allowed = c.allowed();
            let mut wide = masked_start(&vec![1.0; c.len()], &allowed);
            ipf::run(&mut wide, &c.blocks, IPF_SWEEPS);
            let feasible = !matches!(feasible_start(c, term, &wide, &allowed, &mut its)?, StartPoint::None);
            return Ok(Raw::new(wide, f64::INFINITY, its, 0.0, feasible));
        }
    };
    let red = newton::Reduced::new(c, &support)?;
    // Start on the segment towards the projection, still strictly feasible.
    let h0 = term.value(&proj);
    let h1 = term.value(&start);
    let lam = (term.bound - h0) / (h1 - h0);
    let lam = lam + 0.5 * (1.0 - lam);
    let mixed: Vec<f64> = proj.iter().zip(&start).map(|(a, b)| (1.0 - lam) * a + lam * b).collect();
    let x0 = if term.value(&mixed) > term.bound { mixed } else { start };
    let out = red.barrier(term, &red.restrict(&x0), tol * LN_2);
    its += out.iterations;
    let pi = red.expand(&out.point);
    let v = kl_of(&pi, &c.reference);
    Ok(Raw::new(pi, v, its, out.kkt, true))
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")))
    }
}

/// Minimizes `D(pi || R)` subject to the problem's constraints. `tol` is the
/// target accuracy of the optimal value in bits.
pub fn solve(problem: &CouplingProblem, tol: f64) -> Result<SolveReport> {
    check_tol(tol)?;
    let c = Compiled::new(problem)?;
    Ok(solve_compiled(&c, tol)?.into_report(&c, &problem.reference))
}

/// Second route to the same optimum: Newton's method on
/// `D(pi||R) + k * softplus_t(c - H(A|B))` with the smoothing `t` driven to
/// zero and the weight `k` raised until the bound holds, started from the
/// maximum-entropy feasible point instead of the IPF projection.
pub fn solve_penalty(problem: &CouplingProblem, tol: f64) -> Result<SolveReport> {
    check_tol(tol)?;
    let c = Compiled::new(problem)?;
    let r = &problem.reference;
    let (proj, support, mut its) = match prepare(&c) {
        Prepared::Infeasible(p, it) => return Ok(Raw::new(p, f64::INFINITY, it, 0.0, false).into_report(&c, r)),
        Prepared::Unbounded(p, it) => return Ok(unbounded(&c, p, it)?.into_report(&c, r)),
        Prepared::Ready { projection, support, iterations } => (projection, support, iterations),
    };
    if let Some(t) = &c.entropy {
        if t.bound / LN_2 > t.max_value_bits + 1e-12 {
            return Ok(Raw::new(proj, f64::INFINITY, its, 0.0, false).into_report(&c, r));
        }
    }
    let me = max_entropy_point(&c, &support, &proj);
    let red = newton::Reduced::new(&c, &support)?;
    let out = red.penalty(c.entropy.as_ref(), &red.restrict(&me), tol * LN_2);
    its += out.iterations;
    let pi = red.expand(&out.point);
    if let Some(t) = &c.entropy {
        if t.value(&pi) < t.bound - 1e-6 {
            // The bound could not be enforced; find out whether it can hold
            // at all on the reference support.
            let mut extra = 0;
            if !matches!(feasible_start(&c, t, &pi, &support, &mut extra)?, StartPoint::None) {
                return Err(Error::BudgetExhausted("penalty iteration did not enforce the entropy bound".into()));
            }
            let feasible = entropy_reachable(&c, t, &me)?;
            return Ok(Raw::new(pi, f64::INFINITY, its, 0.0, feasible).into_report(&c, r));
        }
    }
    let v = kl_of(&pi, &c.reference);
    Ok(Raw::new(pi, v, its, out.kkt, true).into_report(&c, r))
}

/// A compiled problem whose reference, marginal targets and entropy bound
/// can be replaced between solves without recomputing index maps.
#[derive(Clone)]
pub(crate) struct Template {
    compiled: Compiled,
}

impl Template {
    pub fn new(problem: &CouplingProblem) -> Result<Self> {
        Ok(Self { compiled: Compiled::new(problem)? })
    }

    /// Solves with a new reference, new marginal targets (in constraint
    /// order) and, when given, a new entropy bound in bits.
    pub fn solve_with(&self, reference: Vec<f64>, targets: Vec<Vec<f64>>, bound: Option<f64>, tol: f64) -> Result<Raw> {
        let mut c = self.compiled.clone();
        debug_assert_eq!(reference.len(), c.reference.len());
        c.reference = reference;
        for (b, t) in c.blocks.iter_mut().zip(targets) {
            debug_assert_eq!(b.target.len(), t.len());
            b.target = t;
        }
        if let (Some(t), Some(bits)) = (&mut c.entropy, bound) {
            t.bound = bits * LN_2;
        }
        solve_compiled(&c, tol)
    }
}
