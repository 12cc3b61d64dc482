//! Flat-array evaluation of the exponent components, reusing compiled
//! I-projection templates across the many calls of the outer search.

use super::{DmcComponent, DmcScheme};
use crate::error::Result;
use crate::iproject::{CouplingProblem, EntropyConstraint, Template};
use crate::probkit::{entropy_of, kl_of, Alphabet, JointPmf};
use crate::problem::HypothesisProblem;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Values {
    pub standard: f64,
    pub dec: f64,
    pub miss: f64,
    pub miss_no_uep: f64,
}

impl Values {
    pub fn get(&self, c: DmcComponent) -> f64 {
        match c {
            DmcComponent::Standard => self.standard,
            DmcComponent::Dec => self.dec,
            DmcComponent::Miss => self.miss,
            DmcComponent::MissNoUep => self.miss_no_uep,
        }
    }
}

pub(crate) struct Evaluator {
    nx: usize,
    ny: usize,
    ns: usize,
    /// `P_{XY}` and `Q_{XY}`, `x`-major.
    pxy: Vec<f64>,
    qxy: Vec<f64>,
    px: Vec<f64>,
    py: Vec<f64>,
    gamma: Vec<Vec<f64>>,
    gamma_entropy: Vec<f64>,
    d_y: f64,
    standard: Template,
    dec: Template,
    pub tol: f64,
}

fn placeholder(axes: &[(&str, usize)]) -> Result<JointPmf> {
    JointPmf::uniform(axes.iter().map(|&(n, s)| Alphabet::new(n, s)).collect())
}

impl Evaluator {
    pub fn new(prob: &HypothesisProblem, ns: usize) -> Result<Self> {
        let p = prob.p.permuted(&["X", "Y"])?;
        let q = prob.q.permuted(&["X", "Y"])?;
        let nx = p.size_of("X")?;
        let ny = p.size_of("Y")?;
        let reference = placeholder(&[("S", ns), ("X", nx), ("Y", ny)])?;
        let sx = placeholder(&[("S", ns), ("X", nx)])?;
        let standard = Template::new(
            &CouplingProblem::new(reference.clone())
                .with_marginal(sx.clone())
                .with_marginal(placeholder(&[("S", ns), ("Y", ny)])?),
        )?;
        let dec = Template::new(
            &CouplingProblem::new(reference)
                .with_marginal(sx)
                .with_marginal(placeholder(&[("Y", ny)])?)
                .with_entropy(EntropyConstraint::new(&["S"], &["Y"], 0.0)),
        )?;
        let gamma: Vec<Vec<f64>> = prob.channel.rows().map(|r| r.to_vec()).collect();
        let py = p.marginal(&["Y"])?.probs().to_vec();
        Ok(Self {
            nx,
            ny,
            ns,
            px: p.marginal(&["X"])?.probs().to_vec(),
            d_y: kl_of(&py, q.marginal(&["Y"])?.probs()),
            py,
            pxy: p.probs().to_vec(),
            qxy: q.probs().to_vec(),
            gamma_entropy: gamma.iter().map(|r| entropy_of(r)).collect(),
            gamma,
            standard,
            dec,
            tol: super::SOLVER_TOL,
        })
    }

    fn p_sy(&self, s: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.ns * self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                let pxy = self.pxy[x * self.ny + y];
                for k in 0..self.ns {
                    out[k * self.ny + y] += pxy * s[x][k];
                }
            }
        }
        out
    }

    /// `I(S;X|Y) = H(S|Y) - H(S|X)` by the Markov chain `S - X - Y`.
    pub fn source_rate(&self, s: &[Vec<f64>]) -> f64 {
        let h_sy = entropy_of(&self.p_sy(s)) - entropy_of(&self.py);
        let h_s_x: f64 = self.px.iter().zip(s).map(|(&p, row)| p * entropy_of(row)).sum();
        (h_sy - h_s_x).max(0.0)
    }

    fn v_given(&self, w: &[f64]) -> Vec<f64> {
        let nv = self.gamma[0].len();
        let mut out = vec![0.0; nv];
        for (pw, g) in w.iter().zip(&self.gamma) {
            for (o, gv) in out.iter_mut().zip(g) {
                *o += pw * gv;
            }
        }
        out
    }

    fn info_through(&self, w: &[f64], out: &[f64]) -> f64 {
        let cond: f64 = w.iter().zip(&self.gamma_entropy).map(|(a, b)| a * b).sum();
        (entropy_of(out) - cond).max(0.0)
    }

    /// `(I(W;V|T), I(W;V), sum_t P_T(t) D(P_{V|T=t} || G_{V|W=t}))`.
    pub fn channel_terms(&self, t: &[f64], w: &[Vec<f64>]) -> (f64, f64, f64) {
        let mut cond = 0.0;
        let mut unprotected = 0.0;
        let mut pw = vec![0.0; t.len()];
        for (k, (&pt, row)) in t.iter().zip(w).enumerate() {
            for (a, b) in pw.iter_mut().zip(row) {
                *a += pt * b;
            }
            if pt > 0.0 {
                let v = self.v_given(row);
                cond += pt * self.info_through(row, &v);
                unprotected += pt * kl_of(&v, &self.gamma[k]);
            }
        }
        let plain = self.info_through(&pw, &self.v_given(&pw));
        (cond, plain, unprotected)
    }

    fn rate_bound(&self, t: &[f64], w: &[Vec<f64>], scheme: DmcScheme) -> f64 {
        let (cond, plain, _) = self.channel_terms(t, w);
        match scheme {
            DmcScheme::Uep => cond,
            DmcScheme::NoUep => plain,
        }
    }

    /// Mixes the rows of `P_{S|X}` towards the `S` marginal just enough for
    /// the rate condition of `scheme` to hold.
    pub fn repair(&self, s: &[Vec<f64>], t: &[f64], w: &[Vec<f64>], scheme: DmcScheme) -> Vec<Vec<f64>> {
        let bound = self.rate_bound(t, w, scheme);
        if self.source_rate(s) <= bound {
            return s.to_vec();
        }
        let mut ps = vec![0.0; self.ns];
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
            if self.source_rate(&mix(mid)) <= bound {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        mix(hi)
    }

    /// Components for one auxiliary choice; components not listed in `need`
    /// that require an I-projection are left at `+inf`.
    pub fn values(&self, s: &[Vec<f64>], t: &[f64], w: &[Vec<f64>], need: &[DmcComponent]) -> Result<Values> {
        let (nx, ny, ns) = (self.nx, self.ny, self.ns);
        let source_rate = self.source_rate(s);
        let (channel_rate, channel_rate_no_uep, unprotected) = self.channel_terms(t, w);
        let mut standard = f64::INFINITY;
        let mut dec = f64::INFINITY;
        let want = |c| need.contains(&c);
        if want(DmcComponent::Standard) || want(DmcComponent::Dec) {
            let mut reference = vec![0.0; ns * nx * ny];
            let mut sx = vec![0.0; ns * nx];
            for k in 0..ns {
                for x in 0..nx {
                    sx[k * nx + x] = self.px[x] * s[x][k];
                    for y in 0..ny {
                        reference[(k * nx + x) * ny + y] = self.qxy[x * ny + y] * s[x][k];
                    }
                }
            }
            let sy = self.p_sy(s);
            if want(DmcComponent::Standard) {
                let raw = self.standard.solve_with(reference.clone(), vec![sx.clone(), sy.clone()], None, self.tol)?;
                standard = if raw.feasible { raw.value } else { f64::INFINITY };
            }
            if want(DmcComponent::Dec) {
                let h_sy = entropy_of(&sy) - entropy_of(&self.py);
                let raw = self.dec.solve_with(reference, vec![sx, self.py.clone()], Some(h_sy), self.tol)?;
                let v = if raw.feasible { raw.value } else { f64::INFINITY };
                dec = v + channel_rate - source_rate;
            }
        }
        Ok(Values {
            standard,
            dec,
            miss: self.d_y + channel_rate - source_rate + unprotected,
            miss_no_uep: self.d_y + channel_rate_no_uep - source_rate,
        })
    }

    /// Minimum over `components` after repairing feasibility.
    pub fn objective(
        &self,
        s: &[Vec<f64>],
        t: &[f64],
        w: &[Vec<f64>],
        scheme: DmcScheme,
        components: &[DmcComponent],
    ) -> Result<f64> {
        let s = self.repair(s, t, w, scheme);
        let v = self.values(&s, t, w, components)?;
        Ok(components.iter().map(|&c| v.get(c)).fold(f64::INFINITY, f64::min))
    }
}
