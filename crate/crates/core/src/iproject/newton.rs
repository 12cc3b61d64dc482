//! Newton iterations in null-space coordinates `pi = pi0 + N z`, where the
//! columns of `N` span the directions preserving every marginal constraint.

use nalgebra::{DMatrix, DVector};

use super::linalg::{null_space, solve_spd};
use super::{Compiled, EntropyTerm, MAX_NEWTON_SUPPORT};
use crate::error::{Error, Result};

pub(crate) struct Reduced {
    idx: Vec<usize>,
    full_len: usize,
    r: Vec<f64>,
    basis: DMatrix<f64>,
    /// Entropy cell maps restricted to the support.
    ab: Vec<usize>,
    b: Vec<usize>,
    n_ab: usize,
    n_b: usize,
}

pub(crate) struct Outcome {
    pub point: Vec<f64>,
    pub iterations: usize,
    pub kkt: f64,
}

/// Second-order model of an objective: `diag` is the diagonal part, `w_h`
/// multiplies `-hess H(A|B)` and `w_r` multiplies `grad_h grad_h^T`.
struct Local {
    grad: Vec<f64>,
    diag: Vec<f64>,
    w_h: f64,
    w_r: f64,
    grad_h: Vec<f64>,
    pab: Vec<f64>,
    pb: Vec<f64>,
}

struct EntropyParts {
    h: f64,
    grad: Vec<f64>,
    pab: Vec<f64>,
    pb: Vec<f64>,
}

fn xlogy_ratio(p: &[f64], r: &[f64]) -> f64 {
    p.iter().zip(r).map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() } else { 0.0 }).sum()
}

impl Reduced {
    pub fn new(c: &Compiled, support: &[bool]) -> Result<Self> {
        let idx: Vec<usize> = (0..c.len()).filter(|&x| support[x]).collect();
        let ns = idx.len();
        if ns > MAX_NEWTON_SUPPORT {
            return Err(Error::TooLarge(ns));
        }
        let mut rows = Vec::new();
        for b in &c.blocks {
            let mut cells = vec![vec![0.0; ns]; b.target.len()];
            for (j, &x) in idx.iter().enumerate() {
                cells[b.map[x]][j] = 1.0;
            }
            rows.extend(cells.into_iter().filter(|r| r.iter().any(|&v| v != 0.0)));
        }
        // Total mass is always preserved.
        rows.push(vec![1.0; ns]);
        let basis = null_space(&rows, ns);
        let (ab, b, n_ab, n_b) = match &c.entropy {
            Some(t) => (
                idx.iter().map(|&x| t.ab_map[x]).collect(),
                idx.iter().map(|&x| t.b_map[x]).collect(),
                t.n_ab,
                t.n_b,
            ),
            None => (Vec::new(), Vec::new(), 0, 0),
        };
        Ok(Self {
            r: idx.iter().map(|&x| c.reference[x]).collect(),
            full_len: c.len(),
            idx,
            basis,
            ab,
            b,
            n_ab,
            n_b,
        })
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.idx.iter().map(|&x| full[x]).collect()
    }

    pub fn expand(&self, sub: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.full_len];
        for (&x, &v) in self.idx.iter().zip(sub) {
            out[x] = v;
        }
        out
    }

    fn entropy_parts(&self, pi: &[f64]) -> EntropyParts {
        let mut pab = vec![0.0; self.n_ab];
        let mut pb = vec![0.0; self.n_b];
        for (j, &p) in pi.iter().enumerate() {
            pab[self.ab[j]] += p;
            pb[self.b[j]] += p;
        }
        let xlx = |v: &[f64]| v.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
        let h = -xlx(&pab) + xlx(&pb);
        let grad = (0..pi.len()).map(|j| -(pab[self.ab[j]] / pb[self.b[j]]).ln()).collect();
        EntropyParts { h, grad, pab, pb }
    }

    fn entropy_value(&self, pi: &[f64]) -> f64 {
        let mut pab = vec![0.0; self.n_ab];
        let mut pb = vec![0.0; self.n_b];
        for (j, &p) in pi.iter().enumerate() {
            pab[self.ab[j]] += p;
            pb[self.b[j]] += p;
        }
        let xlx = |v: &[f64]| v.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
        -xlx(&pab) + xlx(&pb)
    }

    fn reduced_hessian(&self, pi: &[f64], m: &Local) -> DMatrix<f64> {
        let n = &self.basis;
        let k = n.ncols();
        let ns = pi.len();
        let mut hn = DMatrix::<f64>::zeros(ns, k);
        for j in 0..ns {
            for c in 0..k {
                hn[(j, c)] = m.diag[j] * n[(j, c)];
            }
        }
        if m.w_h != 0.0 {
            let mut pab_n = DMatrix::<f64>::zeros(self.n_ab, k);
            let mut pb_n = DMatrix::<f64>::zeros(self.n_b, k);
            for j in 0..ns {
                for c in 0..k {
                    pab_n[(self.ab[j], c)] += n[(j, c)];
                    pb_n[(self.b[j], c)] += n[(j, c)];
                }
            }
            for j in 0..ns {
                let (a, b) = (self.ab[j], self.b[j]);
                for c in 0..k {
                    hn[(j, c)] += m.w_h * (pab_n[(a, c)] / m.pab[a] - pb_n[(b, c)] / m.pb[b]);
                }
            }
        }
        if m.w_r != 0.0 {
            let gh = DVector::from_column_slice(&m.grad_h);
            let ghn = n.transpose() * gh;
            for j in 0..ns {
                for c in 0..k {
                    hn[(j, c)] += m.w_r * m.grad_h[j] * ghn[c];
                }
            }
        }
        let h = n.transpose() * hn;
        (&h + h.transpose()) * 0.5
    }

    fn reduce(&self, v: &[f64]) -> DVector<f64> {
        self.basis.transpose() * DVector::from_column_slice(v)
    }

    /// Damped Newton with Armijo backtracking. `value` returns `None`
    /// outside the domain. Returns the final point and iteration count.
    fn minimize(
        &self,
        mut x: Vec<f64>,
        value: &dyn Fn(&[f64]) -> Option<f64>,
        local: &dyn Fn(&[f64]) -> Local,
        max_iter: usize,
        stop: &dyn Fn(&[f64]) -> bool,
    ) -> (Vec<f64>, usize) {
        if self.basis.ncols() == 0 {
            return (x, 0);
        }
        let mut fx = match value(&x) {
            Some(v) => v,
            None => return (x, 0),
        };
        for it in 0..max_iter {
            if stop(&x) {
                return (x, it);
            }
            let m = local(&x);
            let g = self.reduce(&m.grad);
            let h = self.reduced_hessian(&x, &m);
            let dz = match solve_spd(&h, &(-&g)) {
                Some(d) => d,
                None => return (x, it),
            };
            let dec = -g.dot(&dz);
            if !(dec > 1e-15) {
                return (x, it);
            }
            let dx = &self.basis * dz;
            let mut s = 1.0;
            let mut accepted = false;
            while s > 1e-14 {
                let cand: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + s * d).collect();
                if cand.iter().all(|&v| v > 0.0) {
                    if let Some(fc) = value(&cand) {
                        if fc <= fx - 0.25 * s * dec {
                            x = cand;
                            fx = fc;
                            accepted = true;
                            break;
                        }
                    }
                }
                s *= 0.5;
            }
            if !accepted || dec < 1e-13 {
                return (x, it + 1);
            }
        }
        (x, max_iter)
    }

    /// Reduced gradient norm of the Lagrangian. With `fit_multiplier` the
    /// multiplier is the least-squares fit instead of `multiplier`.
    fn kkt(&self, x: &[f64], multiplier: f64, fit_multiplier: bool) -> f64 {
        let gf: Vec<f64> = x.iter().zip(&self.r).map(|(&p, &r)| (p / r).ln() + 1.0).collect();
        let gf = self.reduce(&gf);
        if multiplier == 0.0 && !fit_multiplier {
            return gf.amax();
        }
        let gh = self.reduce(&self.entropy_parts(x).grad);
        let lambda = if fit_multiplier && gh.norm_squared() > 0.0 {
            (gf.dot(&gh) / gh.norm_squared()).max(0.0)
        } else {
            multiplier
        };
        (gf - gh * lambda).amax()
    }

    /// Maximizes `H(A|B)` (plus a vanishing full-entropy regularizer) and
    /// stops early once it reaches `target` nats.
    pub fn maximize_entropy(&self, x0: &[f64], target: f64) -> (Vec<f64>, usize) {
        let mut x = x0.to_vec();
        let mut total = 0;
        let stop = |p: &[f64]| self.entropy_value(p) >= target;
        for eps in [1e-1, 1e-3, 1e-5, 1e-7, 1e-9] {
            let value = |p: &[f64]| {
                let full: f64 = p.iter().map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 }).sum();
                Some(-self.entropy_value(p) + eps * full)
            };
            let local = |p: &[f64]| {
                let e = self.entropy_parts(p);
                Local {
                    grad: e.grad.iter().zip(p).map(|(g, &v)| -g + eps * (v.ln() + 1.0)).collect(),
                    diag: p.iter().map(|&v| eps / v).collect(),
                    w_h: 1.0,
                    w_r: 0.0,
                    grad_h: Vec::new(),
                    pab: e.pab,
                    pb: e.pb,
                }
            };
            let (nx, its) = self.minimize(x, &value, &local, 200, &stop);
            x = nx;
            total += its;
            if stop(&x) {
                break;
            }
        }
        (x, total)
    }

    /// Log-barrier method for `min D(pi||R)` s.t. `H(A|B) >= bound`, from a
    /// strictly feasible start; `tol` in nats.
    pub fn barrier(&self, term: &EntropyTerm, x0: &[f64], tol: f64) -> Outcome {
        let c = term.bound;
        let mut x = x0.to_vec();
        let mut t = 1.0;
        let mut total = 0;
        let never = |_: &[f64]| false;
        loop {
            let value = |p: &[f64]| {
                let g = self.entropy_value(p) - c;
                if g <= 0.0 {
                    return None;
                }
                Some(t * xlogy_ratio(p, &self.r) - g.ln())
            };
            let local = |p: &[f64]| {
                let e = self.entropy_parts(p);
                let g = e.h - c;
                Local {
                    grad: p
                        .iter()
                        .zip(&self.r)
                        .zip(&e.grad)
                        .map(|((&v, &r), &gh)| t * ((v / r).ln() + 1.0) - gh / g)
                        .collect(),
                    diag: p.iter().map(|&v| t / v).collect(),
                    w_h: 1.0 / g,
                    w_r: 1.0 / (g * g),
                    grad_h: e.grad,
                    pab: e.pab,
                    pb: e.pb,
                }
            };
            let (nx, its) = self.minimize(x, &value, &local, 100, &never);
            x = nx;
            total += its;
            if 1.0 / t < 0.1 * tol || t > 1e13 {
                break;
            }
            t *= 10.0;
        }
        let lambda = 1.0 / (t * (self.entropy_value(&x) - c).max(1e-300));
        Outcome { kkt: self.kkt(&x, lambda, true), point: x, iterations: total }
    }

    /// Smoothed exact penalty continuation; plain Newton when `term` is absent.
    pub fn penalty(&self, term: Option<&EntropyTerm>, x0: &[f64], tol: f64) -> Outcome {
        let never = |_: &[f64]| false;
        let mut x = x0.to_vec();
        let mut total = 0;
        let Some(term) = term else {
            let value = |p: &[f64]| Some(xlogy_ratio(p, &self.r));
            let local = |p: &[f64]| Local {
                grad: p.iter().zip(&self.r).map(|(&v, &r)| (v / r).ln() + 1.0).collect(),
                diag: p.iter().map(|&v| 1.0 / v).collect(),
                w_h: 0.0,
                w_r: 0.0,
                grad_h: Vec::new(),
                pab: Vec::new(),
                pb: Vec::new(),
            };
            let (nx, its) = self.minimize(x, &value, &local, 500, &never);
            return Outcome { kkt: self.kkt(&nx, 0.0, false), point: nx, iterations: its };
        };
        let c = term.bound;
        let mut multiplier = 0.0;
        let mut kappa = 1.0;
        while kappa <= 1e8 {
            let mut tau = 1e-1;
            while tau >= 0.1 * tol.min(1e-10) {
                let value = |p: &[f64]| {
                    let u = (c - self.entropy_value(p)) / tau;
                    let sp = if u > 30.0 { u + (-u).exp() } else { u.exp().ln_1p() };
                    Some(xlogy_ratio(p, &self.r) + kappa * tau * sp)
                };
                let local = |p: &[f64]| {
                    let e = self.entropy_parts(p);
                    let u = (c - e.h) / tau;
                    let s = 1.0 / (1.0 + (-u).exp());
                    Local {
                        grad: p
                            .iter()
                            .zip(&self.r)
                            .zip(&e.grad)
                            .map(|((&v, &r), &gh)| (v / r).ln() + 1.0 - kappa * s * gh)
                            .collect(),
                        diag: p.iter().map(|&v| 1.0 / v).collect(),
                        w_h: kappa * s,
                        w_r: kappa * s * (1.0 - s) / tau,
                        grad_h: e.grad,
                        pab: e.pab,
                        pb: e.pb,
                    }
                };
                let (nx, its) = self.minimize(x, &value, &local, 200, &never);
                x = nx;
                total += its;
                let u = (c - self.entropy_value(&x)) / tau;
                multiplier = kappa / (1.0 + (-u).exp());
                tau *= 0.1;
            }
            if self.entropy_value(&x) >= c - 1e-12 {
                break;
            }
            kappa *= 10.0;
        }
        Outcome { kkt: self.kkt(&x, multiplier, true), point: x, iterations: total }
    }
}
