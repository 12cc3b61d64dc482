//! Optimal exponent for generalized testing against conditional
//! independence: under `H = 1` the observations are `P_{X,Z} Q_{Y|Z}` with
//! `Z = f(Y)`, and the exponent is
//! `D(P_Y||Q_Y) + max { I(S;Y|Z) : I(S;X|Z) <= C }`.

use rand_chacha::ChaCha8Rng;

use super::require_dmc;
use crate::error::{Error, Result};
use crate::probkit::{channel_capacity, entropy_of, kl_of};
use crate::problem::HypothesisProblem;
use crate::search::{dirichlet_rows, logits_from_rows, maximize, softmax_rows, SearchBudget};

/// Tolerance of the structural checks on `P` and `Q`.
pub const STRUCTURE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct GtciOptimum {
    pub value: f64,
    pub divergence_y: f64,
    /// `I(S;Y|Z)` at the returned quantizer.
    pub information: f64,
    /// `I(S;X|Z)` at the returned quantizer.
    pub rate: f64,
    pub capacity: f64,
    pub s_given_x: Vec<Vec<f64>>,
}

struct Instance {
    nx: usize,
    ny: usize,
    nz: usize,
    f: Vec<usize>,
    pxy: Vec<f64>,
    px: Vec<f64>,
}

impl Instance {
    /// `(I(S;X|Z), I(S;Y|Z))`, using `S - X - Y` and `Z = f(Y)`.
    fn informations(&self, s: &[Vec<f64>]) -> (f64, f64) {
        let ns = s[0].len();
        let mut sz = vec![0.0; ns * self.nz];
        let mut sy = vec![0.0; ns * self.ny];
        let mut z = vec![0.0; self.nz];
        let mut y = vec![0.0; self.ny];
        for x in 0..self.nx {
            for yy in 0..self.ny {
                let p = self.pxy[x * self.ny + yy];
                let zz = self.f[yy];
                z[zz] += p;
                y[yy] += p;
                for k in 0..ns {
                    sz[k * self.nz + zz] += p * s[x][k];
                    sy[k * self.ny + yy] += p * s[x][k];
                }
            }
        }
        let h_s_z = entropy_of(&sz) - entropy_of(&z);
        let h_s_y = entropy_of(&sy) - entropy_of(&y);
        let h_s_x: f64 = self.px.iter().zip(s).map(|(p, r)| p * entropy_of(r)).sum();
        ((h_s_z - h_s_x).max(0.0), (h_s_z - h_s_y).max(0.0))
    }

    fn repair(&self, s: &[Vec<f64>], cap: f64) -> Vec<Vec<f64>> {
        if self.informations(s).0 <= cap {
            return s.to_vec();
        }
        let ns = s[0].len();
        let mut ps = vec![0.0; ns];
        for (p, row) in self.px.iter().zip(s) {
            for (a, b) in ps.iter_mut().zip(row) {
                *a += p * b;
            }
        }
        let mix = |lam: f64| -> Vec<Vec<f64>> {
            s.iter()
                .map(|row| row.iter().zip(&ps).map(|(a, b)| (1.0 - lam) * a + lam * b).collect())
                .collect()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.informations(&mix(mid)).0 <= cap {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        mix(hi)
    }
}

fn check_structure(prob: &HypothesisProblem, f: &[usize]) -> Result<Instance> {
    require_dmc(prob)?;
    let p = prob.p.permuted(&["X", "Y"])?;
    let q = prob.q.permuted(&["X", "Y"])?;
    let nx = p.size_of("X")?;
    let ny = p.size_of("Y")?;
    if f.len() != ny {
        return Err(Error::InvalidArgument(format!("map has {} entries, Y has {ny} symbols", f.len())));
    }
    let nz = f.iter().max().map_or(1, |m| m + 1);
    let not_gtci = |why: &str| Error::Precondition(format!("not a generalized-TCI instance: {why}"));
    let joint_xz = |v: &[f64]| {
        let mut out = vec![0.0; nx * nz];
        for x in 0..nx {
            for y in 0..ny {
                out[x * nz + f[y]] += v[x * ny + y];
            }
        }
        out
    };
    let pxz = joint_xz(p.probs());
    let qxz = joint_xz(q.probs());
    if pxz.iter().zip(&qxz).any(|(a, b)| (a - b).abs() > STRUCTURE_TOL) {
        return Err(not_gtci("(X, f(Y)) has different laws under the hypotheses"));
    }
    let qy = q.marginal(&["Y"])?.probs().to_vec();
    let mut qz = vec![0.0; nz];
    for y in 0..ny {
        qz[f[y]] += qy[y];
    }
    for x in 0..nx {
        for y in 0..ny {
            let z = f[y];
            let want = if qz[z] > 0.0 { qxz[x * nz + z] * qy[y] / qz[z] } else { 0.0 };
            if (q.probs()[x * ny + y] - want).abs() > STRUCTURE_TOL {
                return Err(not_gtci("X and Y are not conditionally independent given f(Y) under H = 1"));
            }
        }
    }
    Ok(Instance {
        nx,
        ny,
        nz,
        f: f.to_vec(),
        px: p.marginal(&["X"])?.probs().to_vec(),
        pxy: p.probs().to_vec(),
    })
}

/// Optimal exponent with the default search budget.
pub fn gtci_optimal(prob: &HypothesisProblem, f: &[usize], tol: f64) -> Result<f64> {
    Ok(gtci_optimize(prob, f, tol, &SearchBudget::default())?.value)
}

/// Optimal exponent with an explicit search budget; `tol` is the accuracy
/// of the capacity computation.
pub fn gtci_optimize(prob: &HypothesisProblem, f: &[usize], tol: f64, budget: &SearchBudget) -> Result<GtciOptimum> {
    let inst = check_structure(prob, f)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let capacity = channel_capacity(&prob.channel, tol)?;
    let py: Vec<f64> = (0..inst.ny).map(|y| (0..inst.nx).map(|x| inst.pxy[x * inst.ny + y]).sum()).collect();
    let qy = prob.q.marginal(&["Y"])?.probs().to_vec();
    let divergence_y = kl_of(&py, &qy);
    let ns = if divergence_y == 0.0 { inst.nx + 1 } else { inst.nx + 2 };
    let nx = inst.nx;
    let objective = |x: &[f64]| {
        let s = inst.repair(&softmax_rows(x, nx, ns), capacity);
        inst.informations(&s).1
    };
    let init = |rng: &mut ChaCha8Rng| logits_from_rows(&dirichlet_rows(rng, nx, ns, 1.0));
    let identity: Vec<Vec<f64>> = (0..nx)
        .map(|x| (0..ns).map(|k| if k == x { 1.0 - 1e-9 * (ns - 1) as f64 } else { 1e-9 }).collect())
        .collect();
    let out = maximize(&objective, &[logits_from_rows(&identity)], &init, budget);
    let s = inst.repair(&softmax_rows(&out.point, nx, ns), capacity);
    let (rate, information) = inst.informations(&s);
    Ok(GtciOptimum { value: divergence_y + information, divergence_y, information, rate, capacity, s_given_x: s })
}
