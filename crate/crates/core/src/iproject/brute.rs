use serde::Serialize;

use super::linalg::echelon;
use super::{Compiled, CouplingProblem};
use crate::error::{Error, Result};
use crate::probkit::{kl_of, JointPmf};

/// Largest tensor the lattice oracle accepts.
pub const MAX_BRUTE_ENTRIES: usize = 64;
/// Largest number of lattice points visited per level.
pub const MAX_LATTICE_POINTS: usize = 20_000_000;

#[derive(Clone, Debug, Serialize)]
pub struct BruteForceReport {
    pub value: f64,
    pub argmin: JointPmf,
    /// Bound on how far `value` may sit above the true optimum, assuming a
    /// feasible lattice point lies within one step of the optimizer in every
    /// free coordinate.
    pub gap: f64,
    pub points: usize,
    pub free_dims: usize,
}

struct Lattice {
    n: usize,
    free: Vec<usize>,
    pivots: Vec<usize>,
    /// `pi[pivots[r]] = rhs[r] - sum_f coef[r][f] * pi[free[f]]`.
    rhs: Vec<f64>,
    coef: Vec<Vec<f64>>,
    upper: Vec<f64>,
}

impl Lattice {
    fn new(c: &Compiled) -> Result<Self> {
        let n = c.len();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for b in &c.blocks {
            for (cell, &t) in b.target.iter().enumerate() {
                rows.push((0..n).map(|x| if b.map[x] == cell { 1.0 } else { 0.0 }).collect::<Vec<_>>());
                rhs.push(t);
            }
        }
        rows.push(vec![1.0; n]);
        rhs.push(1.0);
        let e = echelon(&rows, &rhs, n, 1e-12);
        if e.inconsistency > 1e-9 {
            return Err(Error::Infeasible("marginal constraints are inconsistent".into()));
        }
        let free = e.free_columns(n);
        let coef = e.rows.iter().map(|r| free.iter().map(|&f| r[f]).collect()).collect();
        let upper = free
            .iter()
            .map(|&f| c.blocks.iter().map(|b| b.target[b.map[f]]).fold(1.0, f64::min))
            .collect();
        Ok(Self { n, free, pivots: e.pivots, rhs: e.rhs, coef, upper })
    }

    fn point(&self, z: &[f64]) -> Option<Vec<f64>> {
        let mut pi = vec![0.0; self.n];
        for (&f, &v) in self.free.iter().zip(z) {
            pi[f] = v;
        }
        for (r, &p) in self.pivots.iter().enumerate() {
            let v = self.rhs[r] - self.coef[r].iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
            if v < -1e-12 {
                return None;
            }
            // Elimination leaves ~1e-17 residue on cells that should be
            // empty, which would read as mass off the reference support.
            pi[p] = if v < 1e-12 { 0.0 } else { v };
        }
        Some(pi)
    }

    fn gap(&self, step: f64, reference: &[f64]) -> f64 {
        let mut delta = vec![0.0; self.n];
        for &f in &self.free {
            delta[f] = step;
        }
        for (r, &p) in self.pivots.iter().enumerate() {
            delta[p] = step * self.coef[r].iter().map(|a| a.abs()).sum::<f64>();
        }
        delta
            .iter()
            .zip(reference)
            .filter(|(_, &r)| r > 0.0)
            .map(|(&d, &r)| {
                let d = d.min(0.5);
                let eta = if d > 0.0 { -d * d.log2() } else { 0.0 };
                eta + d * r.log2().abs()
            })
            .sum()
    }
}

struct Best {
    value: f64,
    z: Vec<f64>,
    pi: Vec<f64>,
    points: usize,
}

fn scan(c: &Compiled, lat: &Lattice, lo: &[f64], hi: &[f64], step: f64) -> Result<Best> {
    let counts: Vec<usize> = lo.iter().zip(hi).map(|(&l, &h)| ((h - l) / step + 1e-9).floor() as usize + 1).collect();
    let total = counts.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k)).unwrap_or(usize::MAX);
    if total > MAX_LATTICE_POINTS {
        return Err(Error::InvalidArgument(format!(
            "lattice has {total} points; use a coarser step or a smaller instance"
        )));
    }
    let mut best = Best { value: f64::INFINITY, z: Vec::new(), pi: Vec::new(), points: 0 };
    let k = lo.len();
    let mut idx = vec![0usize; k];
    for _ in 0..total {
        let z: Vec<f64> = (0..k).map(|d| (lo[d] + idx[d] as f64 * step).min(hi[d])).collect();
        if let Some(pi) = lat.point(&z) {
            best.points += 1;
            let ok = match &c.entropy {
                None => true,
                Some(t) => t.value(&pi) >= t.bound - 1e-12,
            };
            if ok {
                let v = kl_of(&pi, &c.reference);
                if v < best.value || best.pi.is_empty() {
                    best.value = v;
                    best.z = z;
                    best.pi = pi;
                }
            }
        }
        for d in (0..k).rev() {
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    if best.pi.is_empty() {
        return Err(Error::Infeasible("no feasible lattice point".into()));
    }
    Ok(best)
}

/// Exhaustive search over a lattice in the free coordinates of the
/// marginal constraints. `step` must lie in `[1/64, 1]`; instances are
/// limited to 64 tensor entries.
pub fn brute_force(problem: &CouplingProblem, step: f64) -> Result<BruteForceReport> {
    if !(step >= 1.0 / 64.0 - 1e-15 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!("lattice step {step} outside [1/64, 1]")));
    }
    brute_force_refined(problem, step, 0)
}

/// [`brute_force`] followed by `levels` rounds of zooming: each round
/// rescans a window of one step around the incumbent with a quarter step.
pub fn brute_force_refined(problem: &CouplingProblem, step: f64, levels: usize) -> Result<BruteForceReport> {
    lattice_search(problem, step, levels, None)
}

/// [`brute_force_refined`] on the lattice shifted so that `anchor`, a
/// coupling meeting the marginal constraints, is one of its points. A thin
/// entropy-constrained feasible set then always keeps a lattice point when
/// the anchor is feasible.
pub fn brute_force_anchored(
    problem: &CouplingProblem,
    step: f64,
    levels: usize,
    anchor: &JointPmf,
) -> Result<BruteForceReport> {
    if anchor.axes() != problem.reference.axes() {
        return Err(Error::AxisMismatch("anchor must use the reference axes in order".into()));
    }
    lattice_search(problem, step, levels, Some(anchor.probs()))
}

fn lattice_search(problem: &CouplingProblem, step: f64, levels: usize, anchor: Option<&[f64]>) -> Result<BruteForceReport> {
    if problem.reference.len() > MAX_BRUTE_ENTRIES {
        return Err(Error::TooLarge(problem.reference.len()));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!("lattice step {step} outside (0, 1]")));
    }
    let c = Compiled::new(problem)?;
    let lat = Lattice::new(&c)?;
    let k = lat.free.len();
    let lo: Vec<f64> = match anchor {
        None => vec![0.0; k],
        Some(a) => {
            if c.residual(a) > 1e-9 {
                return Err(Error::InvalidArgument("anchor violates the marginal constraints".into()));
            }
            lat.free.iter().map(|&f| (a[f] - step * (a[f] / step + 1e-9).floor()).max(0.0)).collect()
        }
    };
    let mut best = scan(&c, &lat, &lo, &lat.upper, step)?;
    let mut points = best.points;
    let mut h = step;
    for _ in 0..levels {
        let fine = h / 4.0;
        // The window grid passes through the incumbent, so a thin feasible
        // set never loses its only lattice point.
        let lo: Vec<f64> = best.z.iter().map(|&v| v - fine * (v.min(h) / fine + 1e-9).floor()).collect();
        let hi: Vec<f64> = best.z.iter().zip(&lat.upper).map(|(&v, &u)| (v + h).min(u)).collect();
        h = fine;
        match scan(&c, &lat, &lo, &hi, h) {
            Ok(next) => {
                points += next.points;
                if next.value <= best.value {
                    best = next;
                }
            }
            Err(Error::Infeasible(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(BruteForceReport {
        value: best.value,
        argmin: JointPmf::from_parts(problem.reference.axes().to_vec(), best.pi),
        gap: lat.gap(h, &c.reference),
        points,
        free_dims: k,
    })
}
