//! Closed forms for jointly Gaussian sources.
//!
//! Three setups are covered:
//! * point to point: `(X, Y)` with correlation `rho0` against independence,
//!   over a DMC of capacity `C`;
//! * orthogonal MAC: independent standard sources, `Y = X1 + X2 + N0`
//!   against `Y ~ N(0, sigmay_sq)`, over two DMCs of capacities `C1, C2`;
//! * Gaussian MAC `V = W1 + W2 + N` with correlated sources (correlation
//!   `rho`), per-user power `P`, hybrid coding with parameters
//!   `(xi_sq, alpha, beta, gamma_sq)`, and a converse bound.
//!
//! All values are in bits.

use std::f64::consts::LOG2_E;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::{maximize, SearchBudget};

/// Slack on the hybrid-coding feasibility inequalities.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// Scalar description of a Gaussian setup. Fields that a computation does
/// not use are ignored by it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    #[serde(default)]
    pub rho0: f64,
    #[serde(default)]
    pub rho: f64,
    #[serde(default = "one")]
    pub sigma0_sq: f64,
    #[serde(default = "one")]
    pub sigmay_sq: f64,
    #[serde(default = "one")]
    pub sigma_sq: f64,
    #[serde(default)]
    pub power: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub c1: f64,
    #[serde(default)]
    pub c2: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for GaussianSpec {
    fn default() -> Self {
        Self { rho0: 0.0, rho: 0.0, sigma0_sq: 1.0, sigmay_sq: 1.0, sigma_sq: 1.0, power: 0.0, c: 0.0, c1: 0.0, c2: 0.0 }
    }
}

impl GaussianSpec {
    /// The setup of the published Gaussian MAC plot at power `power`.
    pub fn fig7(power: f64) -> Self {
        Self { rho: 0.8, sigma0_sq: 1.0, sigmay_sq: 1.5, sigma_sq: 1.0, power, ..Self::default() }
    }

    fn check_p2p(&self) -> Result<()> {
        unit("rho0", self.rho0)?;
        nonneg("C", self.c)
    }

    fn check_ortho(&self) -> Result<()> {
        positive("sigma0_sq", self.sigma0_sq)?;
        positive("sigmay_sq", self.sigmay_sq)?;
        nonneg("C1", self.c1)?;
        nonneg("C2", self.c2)
    }

    fn check_mac(&self) -> Result<()> {
        unit("rho", self.rho)?;
        positive("sigma0_sq", self.sigma0_sq)?;
        positive("sigmay_sq", self.sigmay_sq)?;
        positive("sigma_sq", self.sigma_sq)?;
        nonneg("P", self.power)
    }
}

fn bad(name: &str, v: f64, want: &str) -> Error {
    Error::InvalidArgument(format!("{name} = {v} must be {want}"))
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(bad(name, v, "in [0, 1]"))
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    // Accepts +inf (an unlimited link).
    if v >= 0.0 {
        Ok(())
    } else {
        Err(bad(name, v, "nonnegative"))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(name, v, "positive and finite"))
    }
}

/// `D(N(0, var_p) || N(0, var_q))` in bits.
pub fn gaussian_kl(var_p: f64, var_q: f64) -> f64 {
    0.5 * (var_q / var_p).log2() + (var_p / (2.0 * var_q) - 0.5) * LOG2_E
}

/// Exponent of the point-to-point scheme with quantizer `S = X + G`,
/// `G ~ N(0, xi_sq)`: `I(S;Y)`.
pub fn p2p_gauss_exponent_at(rho0: f64, xi_sq: f64) -> f64 {
    -0.5 * (1.0 - rho0 * rho0 / (1.0 + xi_sq)).log2()
}

/// Quantization rate `I(S;X)` of the same quantizer.
pub fn p2p_gauss_rate_at(xi_sq: f64) -> f64 {
    0.5 * ((1.0 + xi_sq) / xi_sq).log2()
}

/// Optimal point-to-point exponent.
pub fn p2p_gauss_optimal(spec: &GaussianSpec) -> Result<f64> {
    spec.check_p2p()?;
    let r2 = spec.rho0 * spec.rho0;
    Ok(-0.5 * (1.0 - r2 + r2 * (-2.0 * spec.c).exp2()).log2())
}

/// Optimal exponent over the orthogonal MAC with independent sources.
pub fn mac_ortho_gauss_optimal(spec: &GaussianSpec) -> Result<f64> {
    spec.check_ortho()?;
    let (s0, sy) = (spec.sigma0_sq, spec.sigmay_sq);
    let residual = (-2.0 * spec.c1).exp2() + (-2.0 * spec.c2).exp2() + s0;
    Ok(0.5 * (sy / residual).log2() + ((2.0 + s0) / (2.0 * sy) - 0.5) * LOG2_E)
}

/// `D(P_Y || Q_Y)` of the correlated Gaussian MAC setup.
pub fn mac_gauss_divergence(spec: &GaussianSpec) -> Result<f64> {
    spec.check_mac()?;
    Ok(gaussian_kl(2.0 + 2.0 * spec.rho + spec.sigma0_sq, spec.sigmay_sq))
}

/// Converse bound on the Gaussian MAC exponent.
pub fn mac_gauss_upper(spec: &GaussianSpec) -> Result<f64> {
    spec.check_mac()?;
    let (r, s2) = (spec.rho, spec.sigma_sq);
    let floor = 2.0 * (1.0 + r) * s2 / (2.0 * spec.power * (1.0 + r) + s2);
    let spread = 2.0 + 2.0 * r + spec.sigma0_sq;
    Ok(0.5 * ((spec.sigmay_sq / (floor + spec.sigma0_sq)).log2() + (spread / spec.sigmay_sq - 1.0) * LOG2_E))
}

/// Hybrid-coding parameters: quantization noise `xi_sq`, input
/// `W = alpha X + beta G + F`, and `gamma_sq`. `xi_sq = +inf` is the limit
/// of a useless quantizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridParams {
    pub xi_sq: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma_sq: f64,
}

impl HybridParams {
    /// Nothing transmitted and nothing quantized.
    pub const SILENT: Self = Self { xi_sq: f64::INFINITY, alpha: 0.0, beta: 0.0, gamma_sq: 0.0 };

    pub fn power(&self) -> f64 {
        let shaped = if self.beta == 0.0 { 0.0 } else { self.beta * self.beta * self.xi_sq };
        self.gamma_sq + self.alpha * self.alpha + shaped
    }
}

/// Residual variance of `X1 + X2` seen through `(S1, S2, V)`.
fn hybrid_floor(spec: &GaussianSpec, h: &HybridParams) -> f64 {
    let (r, s2) = (spec.rho, spec.sigma_sq);
    let d2 = (h.alpha - h.beta).powi(2);
    if h.xi_sq.is_infinite() {
        return 2.0 * (1.0 + r) * s2 / (2.0 * d2 * (1.0 + r) + s2);
    }
    let x = h.xi_sq;
    2.0 * x * (1.0 + r) * s2 / (2.0 * x * d2 * (1.0 + r) + s2 * (1.0 + r + x))
}

/// Exponent of the hybrid scheme at `h`, feasible or not.
pub fn hybrid_exponent(spec: &GaussianSpec, h: &HybridParams) -> Result<f64> {
    spec.check_mac()?;
    let spread = spec.sigma0_sq + 2.0 + 2.0 * spec.rho;
    let floor = hybrid_floor(spec, h);
    Ok(0.5 * (spec.sigmay_sq / (floor + spec.sigma0_sq)).log2() + (spread / (2.0 * spec.sigmay_sq) - 0.5) * LOG2_E)
}

/// The power budget and the two rate conditions of the hybrid scheme.
pub fn hybrid_feasible(spec: &GaussianSpec, h: &HybridParams) -> bool {
    if h.gamma_sq < 0.0 || !(h.xi_sq > 0.0) {
        return false;
    }
    let power_ok = h.power() <= spec.power + FEASIBILITY_SLACK;
    let (r, s2, p) = (spec.rho, spec.sigma_sq, spec.power);
    let d2 = (h.alpha - h.beta).powi(2);
    let a2r = 2.0 * h.alpha * h.alpha * r;
    if h.xi_sq.is_infinite() {
        // Both left-hand sides tend to 1; the cross term vanishes when beta = 0.
        let den = s2 + 2.0 * d2 * (1.0 + r);
        let cross = if h.beta == 0.0 { 0.0 } else { f64::INFINITY };
        return power_ok
            && 1.0 <= (s2 + 2.0 * p - h.gamma_sq + a2r - cross) / den + FEASIBILITY_SLACK
            && 1.0 <= (s2 + 2.0 * p + a2r) / den + FEASIBILITY_SLACK;
    }
    let x = h.xi_sq;
    let den = s2 + 2.0 * d2 * (1.0 + r) * x / (1.0 + r + x);
    let lead = (1.0 + x).powi(2) - r * r;
    let cross = (h.alpha * (1.0 + r) + h.beta * x).powi(2) / (1.0 + x);
    let first = lead / ((1.0 + x) * x) <= (s2 + 2.0 * p - h.gamma_sq + a2r - cross) / den + FEASIBILITY_SLACK;
    let second = lead / (x * x) <= (s2 + 2.0 * p + a2r) / den + FEASIBILITY_SLACK;
    power_ok && first && second
}

/// Log-spaced scan of `xi_sq` used to bracket the smallest feasible value.
const XI_GRID: (f64, f64, usize) = (-6.0, 8.0, 141);

/// Smallest feasible `xi_sq` for the given input parameters (the exponent
/// decreases in `xi_sq`), or `+inf` when only the limit is feasible.
fn smallest_feasible_xi(spec: &GaussianSpec, alpha: f64, beta: f64, gamma_sq: f64) -> Option<f64> {
    let at = |xi_sq: f64| hybrid_feasible(spec, &HybridParams { xi_sq, alpha, beta, gamma_sq });
    let (lo, hi, n) = XI_GRID;
    let mut prev: Option<f64> = None;
    for k in 0..n {
        let x = 10f64.powf(lo + (hi - lo) * k as f64 / (n - 1) as f64);
        if at(x) {
            let Some(mut a) = prev else { return Some(x) };
            let mut b = x;
            for _ in 0..60 {
                let m = (a * b).sqrt();
                if at(m) {
                    b = m;
                } else {
                    a = m;
                }
            }
            return Some(b);
        }
        prev = Some(x);
    }
    at(f64::INFINITY).then_some(f64::INFINITY)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GaussAchievable {
    pub value: f64,
    pub params: HybridParams,
    /// Whether the optimum is the useless-quantizer limit `xi_sq = +inf`.
    pub degenerate: bool,
    pub evaluations: usize,
}

impl GaussAchievable {
    fn at(spec: &GaussianSpec, params: HybridParams, evaluations: usize) -> Result<Self> {
        Ok(Self { value: hybrid_exponent(spec, &params)?, params, degenerate: params.xi_sq.is_infinite(), evaluations })
    }
}

/// Best exponent of separate coding (`alpha = beta = 0`), exact up to the
/// bisection on `xi_sq`.
pub fn mac_gauss_separate(spec: &GaussianSpec) -> Result<GaussAchievable> {
    spec.check_mac()?;
    let xi_sq = smallest_feasible_xi(spec, 0.0, 0.0, 0.0).unwrap_or(f64::INFINITY);
    GaussAchievable::at(spec, HybridParams { xi_sq, ..HybridParams::SILENT }, 1)
}

/// Budget the hybrid search uses unless told otherwise.
pub fn default_budget() -> SearchBudget {
    SearchBudget::new(64, 300, 0)
}

/// Hybrid-coding exponent maximized over `(alpha, beta, gamma_sq)` by
/// multi-start search, with the smallest feasible `xi_sq` for each.
pub fn mac_gauss_achievable(spec: &GaussianSpec, budget: &SearchBudget) -> Result<GaussAchievable> {
    achievable_from(spec, budget, &[])
}

fn achievable_from(spec: &GaussianSpec, budget: &SearchBudget, warm: &[HybridParams]) -> Result<GaussAchievable> {
    spec.check_mac()?;
    let p = spec.power;
    let decode = |z: &[f64]| -> Option<HybridParams> {
        let (alpha, beta, gamma_sq) = (z[0], z[1], z[2] * z[2]);
        if alpha * alpha + gamma_sq > p + FEASIBILITY_SLACK {
            return None;
        }
        let xi_sq = smallest_feasible_xi(spec, alpha, beta, gamma_sq)?;
        Some(HybridParams { xi_sq, alpha, beta, gamma_sq })
    };
    let objective = |z: &[f64]| match decode(z) {
        Some(h) => hybrid_exponent(spec, &h).unwrap_or(f64::NEG_INFINITY),
        None => f64::NEG_INFINITY,
    };
    let root = p.sqrt();
    let init = |rng: &mut rand_chacha::ChaCha8Rng| {
        vec![rng.gen_range(0.0..=root), rng.gen_range(-3.0 * root..=3.0 * root), rng.gen_range(0.0..=0.3 * root)]
    };
    // Separate coding, and uncoded transmission at full power.
    let mut anchors = vec![vec![0.0, 0.0, 0.0], vec![root, 0.0, 0.0]];
    anchors.extend(warm.iter().map(|h| vec![h.alpha, h.beta, h.gamma_sq.sqrt()]));
    let out = maximize(&objective, &anchors, &init, budget);
    let best = decode(&out.point).unwrap_or(HybridParams::SILENT);
    GaussAchievable::at(spec, best, out.evaluations)
}

/// One point of the Gaussian MAC power sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PowerPoint {
    pub power: f64,
    pub hybrid: f64,
    pub separate: f64,
    pub upper: f64,
    pub hybrid_params: HybridParams,
}

/// Sweeps the power of `base`. Each point's search is warm-started from the
/// previous optimum, which stays feasible at a larger power, so the hybrid
/// curve is nondecreasing along an increasing sweep.
pub fn power_sweep(base: &GaussianSpec, powers: &[f64], budget: &SearchBudget) -> Result<Vec<PowerPoint>> {
    let mut out = Vec::with_capacity(powers.len());
    let mut warm: Vec<HybridParams> = Vec::new();
    for &power in powers {
        let spec = GaussianSpec { power, ..base.clone() };
        let hybrid = achievable_from(&spec, budget, &warm)?;
        warm = vec![hybrid.params];
        out.push(PowerPoint {
            power,
            hybrid: hybrid.value,
            separate: mac_gauss_separate(&spec)?.value,
            upper: mac_gauss_upper(&spec)?,
            hybrid_params: hybrid.params,
        });
    }
    Ok(out)
}

/// `count` powers evenly spaced on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn p2p_trivial_cases() {
        let spec = |rho0, c| GaussianSpec { rho0, c, ..Default::default() };
        assert_eq!(p2p_gauss_optimal(&spec(0.0, 3.0)).unwrap(), 0.0);
        assert!(p2p_gauss_optimal(&spec(0.7, 0.0)).unwrap().abs() < 1e-15);
        let v = p2p_gauss_optimal(&spec(0.8, 1.0)).unwrap();
        assert!(close(v, 0.5 * (1.0f64 / 0.52).log2(), 1e-12));
        let unlimited = p2p_gauss_optimal(&spec(0.8, f64::INFINITY)).unwrap();
        assert!(close(unlimited, -0.5 * (1.0f64 - 0.64).log2(), 1e-12));
        assert!(p2p_gauss_optimal(&spec(1.2, 1.0)).is_err());
    }

    #[test]
    fn p2p_quantizer_at_capacity_attains_the_optimum() {
        // Rate equal to capacity at xi_sq = 1 / (2^{2C} - 1).
        let c: f64 = 0.7;
        let xi = 1.0 / ((2.0 * c).exp2() - 1.0);
        assert!(close(p2p_gauss_rate_at(xi), c, 1e-12));
        let spec = GaussianSpec { rho0: 0.6, c, ..Default::default() };
        assert!(close(p2p_gauss_exponent_at(0.6, xi), p2p_gauss_optimal(&spec).unwrap(), 1e-12));
    }

    #[test]
    fn kl_matches_a_quadrature() {
        let (vp, vq): (f64, f64) = (2.3, 1.1);
        let pdf = |x: f64, v: f64| (-x * x / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let h = 1e-3;
        let sum: f64 = (-20_000..=20_000)
            .map(|k| {
                let x = k as f64 * h;
                let p = pdf(x, vp);
                p * (p / pdf(x, vq)).log2() * h
            })
            .sum();
        assert!(close(gaussian_kl(vp, vq), sum, 1e-9));
        assert_eq!(gaussian_kl(1.7, 1.7), 0.0);
    }

    #[test]
    fn ortho_zero_capacity_is_the_divergence_of_y() {
        let spec = GaussianSpec { sigma0_sq: 0.5, sigmay_sq: 4.0, ..Default::default() };
        let v = mac_ortho_gauss_optimal(&spec).unwrap();
        assert!(close(v, gaussian_kl(2.5, 4.0), 1e-12));
        let inf = GaussianSpec { c1: f64::INFINITY, c2: f64::INFINITY, sigmay_sq: 2.5, ..spec };
        let v = mac_ortho_gauss_optimal(&inf).unwrap();
        assert!(close(v, 0.5 * (2.5f64 / 0.5).log2(), 1e-12));
    }

    #[test]
    fn upper_bound_at_zero_power_is_the_divergence_of_y() {
        let spec = GaussianSpec { rho: 0.3, sigma0_sq: 0.7, sigmay_sq: 2.0, sigma_sq: 1.3, power: 0.0, ..Default::default() };
        let d = mac_gauss_divergence(&spec).unwrap();
        assert!(close(mac_gauss_upper(&spec).unwrap(), d, 1e-12));
        let sep = mac_gauss_separate(&spec).unwrap();
        assert!(sep.degenerate);
        assert!(close(sep.value, d, 1e-12));
        assert!(close(mac_gauss_achievable(&spec, &SearchBudget::new(4, 100, 0)).unwrap().value, d, 1e-12));
    }

    #[test]
    fn silent_choice_is_always_feasible() {
        for power in [0.0, 0.3, 5.0] {
            let spec = GaussianSpec { rho: 0.9, power, ..Default::default() };
            assert!(hybrid_feasible(&spec, &HybridParams::SILENT));
        }
    }

    #[test]
    fn separate_xi_sits_on_the_feasibility_boundary() {
        let spec = GaussianSpec::fig7(2.0);
        let sep = mac_gauss_separate(&spec).unwrap();
        let xi = sep.params.xi_sq;
        assert!(xi.is_finite());
        assert!(hybrid_feasible(&spec, &sep.params));
        assert!(!hybrid_feasible(&spec, &HybridParams { xi_sq: xi * (1.0 - 1e-6), ..sep.params }));
    }

    #[test]
    fn hybrid_search_beats_a_dense_grid() {
        let spec = GaussianSpec { rho: 0.0, sigma0_sq: 1.0, sigmay_sq: 3.0, sigma_sq: 1.0, power: 1.0, ..Default::default() };
        let found = mac_gauss_achievable(&spec, &default_budget()).unwrap();
        assert!(hybrid_feasible(&spec, &found.params));
        let mut grid = f64::NEG_INFINITY;
        let steps = |lo: f64, hi: f64| {
            let n = ((hi - lo) / 0.05).round() as usize;
            (0..=n).map(move |k| lo + 0.05 * k as f64)
        };
        for xi_sq in steps(0.05, 5.0) {
            for alpha in steps(0.0, 1.0) {
                for beta in steps(-3.0, 3.0) {
                    for gamma_sq in steps(0.0, 1.0) {
                        let h = HybridParams { xi_sq, alpha, beta, gamma_sq };
                        if hybrid_feasible(&spec, &h) {
                            grid = grid.max(hybrid_exponent(&spec, &h).unwrap());
                        }
                    }
                }
            }
        }
        assert!(found.value >= grid - 1e-3, "search {} grid {grid}", found.value);
        assert!(found.value <= mac_gauss_upper(&spec).unwrap() + 1e-9);
    }
}
