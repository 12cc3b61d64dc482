//! Heuristic outer search over hybrid-coding auxiliaries. MAC tensors are
//! large, so budgets here are meant to be small.

use rand::Rng;
use rayon::prelude::*;

use super::{mac_exponents, Dims, MacAux, MacModel, MacReport, FEASIBILITY_SLACK};
use crate::error::{Error, Result};
use crate::problem::HypothesisProblem;
use crate::search::{dirichlet_rows, logits_from_rows, polish, softmax_rows, start_rng, SearchBudget};

/// Maps are enumerated or sampled only when `|S_i x X_i|` is at most this.
pub const MAX_MAP_DOMAIN: usize = 8;

#[derive(Clone, Debug)]
pub struct MacOptimum {
    pub value: f64,
    pub report: MacReport,
    pub aux: MacAux,
    pub evaluations: usize,
    pub start_values: Vec<f64>,
}

struct Layout {
    d: Dims,
    ns1: usize,
    ns2: usize,
}

impl Layout {
    fn nt(&self) -> usize {
        self.d.w1 * self.d.w2
    }

    fn rows1(&self) -> usize {
        self.d.x1 * self.nt()
    }

    fn rows2(&self) -> usize {
        self.d.x2 * self.nt()
    }

    fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let a = self.nt() - 1;
        let b = a + self.rows1() * (self.ns1 - 1);
        let t = softmax_rows(&x[..a], 1, self.nt()).remove(0);
        (t, softmax_rows(&x[a..b], self.rows1(), self.ns1), softmax_rows(&x[b..], self.rows2(), self.ns2))
    }

    fn join(&self, t: &[f64], s1: &[Vec<f64>], s2: &[Vec<f64>]) -> Vec<f64> {
        let mut out = logits_from_rows(&[t.to_vec()]);
        out.extend(logits_from_rows(s1));
        out.extend(logits_from_rows(s2));
        out
    }
}

/// Mixes each quantizer row `P_{S_i|X_i=x,T=t}` towards `P_{S_i|T=t}` by a
/// common weight, the smallest found by bisection that meets the rate
/// conditions.
fn repair(prob: &HypothesisProblem, aux: MacAux) -> Result<MacAux> {
    let feasible = |a: &MacAux| -> Result<bool> {
        let rc = MacModel::new(prob, a)?.rate_conditions()?;
        Ok(rc.iter().all(|(l, r)| *l <= r + 0.5 * FEASIBILITY_SLACK))
    };
    if feasible(&aux)? {
        return Ok(aux);
    }
    let d = Dims::of(prob)?;
    let nt = d.w1 * d.w2;
    let px1 = prob.p.marginal(&["X1"])?.probs().to_vec();
    let px2 = prob.p.marginal(&["X2"])?.probs().to_vec();
    let rows1: Vec<Vec<f64>> = aux.s1.rows().map(|r| r.to_vec()).collect();
    let rows2: Vec<Vec<f64>> = aux.s2.rows().map(|r| r.to_vec()).collect();
    // Quantizer rows are indexed by (x, t) with t fastest.
    let centre = |rows: &[Vec<f64>], px: &[f64]| -> Vec<Vec<f64>> {
        let ns = rows[0].len();
        (0..nt)
            .map(|t| {
                let mut c = vec![0.0; ns];
                for (x, &p) in px.iter().enumerate() {
                    for (a, b) in c.iter_mut().zip(&rows[x * nt + t]) {
                        *a += p * b;
                    }
                }
                c
            })
            .collect()
    };
    let (c1, c2) = (centre(&rows1, &px1), centre(&rows2, &px2));
    let mix = |rows: &[Vec<f64>], c: &[Vec<f64>], lam: f64| -> Vec<Vec<f64>> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| r.iter().zip(&c[i % nt]).map(|(a, b)| (1.0 - lam) * a + lam * b).collect())
            .collect()
    };
    let build = |lam: f64| -> Result<MacAux> {
        MacAux::from_rows(prob, aux.t.probs(), &mix(&rows1, &c1, lam), &mix(&rows2, &c2, lam), aux.f1.clone(), aux.f2.clone())
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if feasible(&build(mid)?)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    build(hi)
}

fn map_count(nw: usize, domain: usize) -> Option<usize> {
    (0..domain).try_fold(1usize, |acc, _| acc.checked_mul(nw))
}

fn map_from_index(mut k: usize, nw: usize, domain: usize) -> Vec<usize> {
    (0..domain)
        .map(|_| {
            let w = k % nw;
            k /= nw;
            w
        })
        .collect()
}

/// Maximizes the minimum of the nine components. Quantizers use alphabets
/// of sizes `s_sizes`. When `maps` is `None`, every start draws its maps:
/// all pairs are visited in order when there are no more pairs than random
/// starts, otherwise pairs are sampled; the uncoded maps `f_i(s, x) = x`
/// (folded into `W_i`) are always tried first.
pub fn mac_optimize(
    prob: &HypothesisProblem,
    s_sizes: (usize, usize),
    maps: Option<(Vec<usize>, Vec<usize>)>,
    budget: &SearchBudget,
) -> Result<MacOptimum> {
    super::require_mac(prob)?;
    let d = Dims::of(prob)?;
    let (ns1, ns2) = s_sizes;
    if ns1 == 0 || ns2 == 0 {
        return Err(Error::InvalidArgument("quantizer alphabets must be nonempty".into()));
    }
    let (dom1, dom2) = (ns1 * d.x1, ns2 * d.x2);
    if maps.is_none() && (dom1 > MAX_MAP_DOMAIN || dom2 > MAX_MAP_DOMAIN) {
        return Err(Error::InvalidArgument(format!(
            "maps must be supplied when |S_i x X_i| exceeds {MAX_MAP_DOMAIN}"
        )));
    }
    let layout = Layout { d, ns1, ns2 };
    let uncoded = (
        (0..dom1).map(|i| (i % d.x1) % d.w1).collect::<Vec<_>>(),
        (0..dom2).map(|i| (i % d.x2) % d.w2).collect::<Vec<_>>(),
    );
    let pairs = map_count(d.w1, dom1).zip(map_count(d.w2, dom2)).and_then(|(a, b)| a.checked_mul(b));
    let total = budget.starts + 1;
    let build = |x: &[f64], f: &(Vec<usize>, Vec<usize>)| -> Result<MacAux> {
        let (t, s1, s2) = layout.split(x);
        repair(prob, MacAux::from_rows(prob, &t, &s1, &s2, f.0.clone(), f.1.clone())?)
    };
    let runs: Vec<(f64, Vec<f64>, (Vec<usize>, Vec<usize>), usize)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut rng = start_rng(budget.seed, i);
            let f = match (&maps, i) {
                (Some(m), _) => m.clone(),
                (None, 0) => uncoded.clone(),
                (None, _) => match pairs {
                    Some(n) if n <= budget.starts => {
                        let k = (i - 1) % n;
                        let n1 = map_count(d.w1, dom1).unwrap_or(1);
                        (map_from_index(k % n1, d.w1, dom1), map_from_index(k / n1, d.w2, dom2))
                    }
                    _ => (
                        (0..dom1).map(|_| rng.gen_range(0..d.w1)).collect(),
                        (0..dom2).map(|_| rng.gen_range(0..d.w2)).collect(),
                    ),
                },
            };
            let x0 = if i == 0 {
                let t = vec![1.0 / layout.nt() as f64; layout.nt()];
                // Quantizers that mostly copy the source symbol.
                let near = |rows: usize, ns: usize| -> Vec<Vec<f64>> {
                    (0..rows)
                        .map(|r| {
                            let x = r / layout.nt();
                            let row: Vec<f64> = (0..ns).map(|s| if s == x % ns { 1.0 } else { 0.1 }).collect();
                            let z: f64 = row.iter().sum();
                            row.into_iter().map(|v| v / z).collect()
                        })
                        .collect()
                };
                layout.join(&t, &near(layout.rows1(), ns1), &near(layout.rows2(), ns2))
            } else {
                let t = dirichlet_rows(&mut rng, 1, layout.nt(), 1.0).remove(0);
                let s1 = dirichlet_rows(&mut rng, layout.rows1(), ns1, 1.0);
                let s2 = dirichlet_rows(&mut rng, layout.rows2(), ns2, 1.0);
                layout.join(&t, &s1, &s2)
            };
            let objective = |x: &[f64]| -> f64 {
                build(x, &f).and_then(|a| mac_exponents(prob, &a)).map_or(f64::NEG_INFINITY, |r| r.theta)
            };
            let (x, v, e) = polish(&objective, x0, budget.evals_per_start.max(1), 1.0);
            (v, x, f, e)
        })
        .collect();
    let mut best: Option<(f64, Vec<f64>, (Vec<usize>, Vec<usize>))> = None;
    let mut evaluations = 0;
    let mut start_values = Vec::with_capacity(total);
    for (v, x, f, e) in runs {
        evaluations += e;
        start_values.push(v);
        if best.as_ref().map_or(true, |b| v > b.0) {
            best = Some((v, x, f));
        }
    }
    let (value, x, f) = best.ok_or_else(|| Error::BudgetExhausted("no starts".into()))?;
    if value == f64::NEG_INFINITY {
        return Err(Error::BudgetExhausted("no feasible auxiliary found".into()));
    }
    let aux = build(&x, &f)?;
    let report = mac_exponents(prob, &aux)?;
    Ok(MacOptimum { value: report.theta, report, aux, evaluations, start_values })
}
