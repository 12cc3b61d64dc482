//! Deterministic multi-start derivative-free maximization.
//!
//! Each start runs Nelder-Mead (adaptive coefficients) with restarts of the
//! simplex around the incumbent until its evaluation budget is spent. Starts
//! run in parallel; start `i` draws from a ChaCha stream seeded by
//! `(seed, i)`, and results are reduced in start order, so the outcome does
//! not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Random starts, in addition to any structured anchor points.
    pub starts: usize,
    /// Objective evaluations per start.
    pub evals_per_start: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { starts: 32, evals_per_start: 1500, seed: 0 }
    }
}

impl SearchBudget {
    pub fn new(starts: usize, evals_per_start: usize, seed: u64) -> Self {
        Self { starts, evals_per_start, seed }
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Best value reached from each start, anchors first.
    pub start_values: Vec<f64>,
}

pub fn start_rng(seed: u64, start: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64 + 1);
    rng
}

/// Maximizes `objective` from every anchor and from `budget.starts` random
/// points drawn by `init`. Non-finite objective values count as `-inf`.
pub fn maximize<F, I>(objective: &F, anchors: &[Vec<f64>], init: &I, budget: &SearchBudget) -> SearchOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
    I: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    let total = anchors.len() + budget.starts;
    let runs: Vec<(Vec<f64>, f64, usize)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut rng = start_rng(budget.seed, i);
            let x0 = if i < anchors.len() { anchors[i].clone() } else { init(&mut rng) };
            polish(objective, x0, budget.evals_per_start, 1.0)
        })
        .collect();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut evaluations = 0;
    let mut start_values = Vec::with_capacity(total);
    for (x, v, e) in runs {
        evaluations += e;
        start_values.push(v);
        if v > best.1 || best.0.is_empty() {
            best = (x, v);
        }
    }
    SearchOutcome { point: best.0, value: best.1, evaluations, start_values }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Nelder-Mead with simplex restarts around the incumbent; maximizes.
pub fn polish<F: Fn(&[f64]) -> f64>(objective: &F, x0: Vec<f64>, max_evals: usize, step: f64) -> (Vec<f64>, f64, usize) {
    let f = |x: &[f64]| -sanitize(objective(x));
    let mut x = x0;
    let mut fx = f(&x);
    let mut used = 1;
    let mut scale = step;
    while used < max_evals && x.len() > 0 {
        let (nx, nf, e) = nelder_mead(&f, &x, scale, max_evals - used);
        used += e;
        let improved = nf < fx - 1e-13;
        if nf <= fx {
            x = nx;
            fx = nf;
        }
        scale = if improved { scale.max(0.05) * 0.5 } else { scale * 0.25 };
        if scale < 1e-7 {
            break;
        }
    }
    (x, -fx, used)
}

fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], step: f64, max_evals: usize) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut evals = 0;
    simplex.push((x0.to_vec(), f(x0)));
    evals += 1;
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        let fv = f(&v);
        evals += 1;
        simplex.push((v, fv));
    }
    while evals + 2 <= max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= 1e-14 * (1.0 + simplex[0].1.abs()) && size < 1e-6) || size < 1e-10 {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(alpha * beta);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let outside = fr < worst.1;
            let xc = if outside { along(alpha * gamma) } else { along(-gamma) };
            let fc = f(&xc);
            evals += 1;
            if (outside && fc <= fr) || (!outside && fc < worst.1) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (v, fv) in simplex[1..].iter_mut() {
                    for (a, b) in v.iter_mut().zip(&best) {
                        *a = b + delta * (*a - b);
                    }
                    *fv = f(v);
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    (x, fx, evals)
}

/// Row-stochastic matrices from unconstrained logits: each row of `cols`
/// entries uses `cols - 1` logits, the last entry's logit fixed at zero.
pub fn softmax_rows(params: &[f64], rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|r| {
            let logits: Vec<f64> = (0..cols)
                .map(|c| if c + 1 < cols { params[r * (cols - 1) + c] } else { 0.0 })
                .collect();
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Inverse of [`softmax_rows`], flooring probabilities at `1e-15`.
pub fn logits_from_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for row in rows {
        let last = row.last().copied().unwrap_or(1.0).max(1e-15).ln();
        for &p in &row[..row.len() - 1] {
            out.push(p.max(1e-15).ln() - last);
        }
    }
    out
}

pub fn param_count(rows: usize, cols: usize) -> usize {
    rows * (cols - 1)
}

/// Rows drawn from a symmetric Dirichlet distribution.
pub fn dirichlet_rows<R: Rng>(rng: &mut R, rows: usize, cols: usize, concentration: f64) -> Vec<Vec<f64>> {
    let g = Gamma::new(concentration, 1.0).expect("positive concentration");
    (0..rows)
        .map(|_| {
            let v: Vec<f64> = (0..cols).map(|_| g.sample(rng).max(1e-300)).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
        .collect()
}
