//! Sweeps over the binary example: exponent curves with and without UEP,
//! binding-component labels, and the `r` values where the labels change.

use rayon::prelude::*;

use crate::dmc::{binary_example, dmc_optimize_over, dmc_optimize_seeded, DmcAux, DmcComponent, DmcScheme};
use crate::error::Result;
use crate::search::SearchBudget;

/// `(p0, q0, p1)` of the binary example.
pub const EXAMPLE_SOURCES: (f64, f64, f64) = (0.2, 0.3, 0.4);
/// A component binds when dropping it from the minimum raises the optimized
/// exponent by more than this many bits.
pub const BINDING_TOL: f64 = 2e-6;

pub fn example_at(r: f64) -> Result<crate::problem::HypothesisProblem> {
    let (p0, q0, p1) = EXAMPLE_SOURCES;
    binary_example(p0, q0, p1, r)
}

pub fn components_of(scheme: DmcScheme) -> &'static [DmcComponent] {
    match scheme {
        DmcScheme::Uep => &DmcComponent::UEP,
        DmcScheme::NoUep => &DmcComponent::NO_UEP,
    }
}

#[derive(Clone, Debug)]
pub struct Regime {
    pub theta: f64,
    pub binding: Vec<DmcComponent>,
    pub aux: DmcAux,
}

impl Regime {
    pub fn label(&self) -> String {
        label_of(&self.binding)
    }
}

pub fn label_of(set: &[DmcComponent]) -> String {
    if set.is_empty() {
        return "none".into();
    }
    set.iter().map(|c| c.name()).collect::<Vec<_>>().join("+")
}

/// Optimizes the exponent of `scheme` at channel crossover `r`, then
/// re-optimizes with each component left out (seeded with the full
/// optimum) to find which components bind.
pub fn binding_components(r: f64, scheme: DmcScheme, budget: &SearchBudget, tol: f64) -> Result<Regime> {
    let prob = example_at(r)?;
    let comps = components_of(scheme);
    let mut full = dmc_optimize_over(&prob, scheme, comps, budget)?;
    let mut dropped = Vec::with_capacity(comps.len());
    for &c in comps {
        let rest: Vec<DmcComponent> = comps.iter().copied().filter(|&d| d != c).collect();
        dropped.push(dmc_optimize_seeded(&prob, scheme, &rest, budget, std::slice::from_ref(&full.aux))?);
    }
    // An under-optimized full problem would make every component look
    // binding; give it another run seeded with all the optima found.
    let seeds: Vec<DmcAux> = std::iter::once(&full).chain(&dropped).map(|o| o.aux.clone()).collect();
    let again = dmc_optimize_seeded(&prob, scheme, comps, budget, &seeds)?;
    if again.value > full.value {
        full = again;
    }
    let binding = comps
        .iter()
        .zip(&dropped)
        .filter(|(_, d)| d.value - full.value > tol)
        .map(|(&c, _)| c)
        .collect();
    Ok(Regime { theta: full.value, binding, aux: full.aux })
}

/// The `r` grid of the exponent-curve sweep, `lo..=hi` in steps of `step`.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if hi < lo || step <= 0.0 {
        return Vec::new();
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9).collect()
}

pub fn fig3_grid() -> Vec<f64> {
    grid(0.01, 0.49, 0.005)
}

#[derive(Clone, Debug)]
pub struct CurvePoint {
    pub r: f64,
    pub theta_uep: f64,
    pub theta_no_uep: f64,
    /// Binding components with UEP, or empty when labels were not requested.
    pub label: String,
    pub error: Option<String>,
}

fn curve_point(r: f64, budget: &SearchBudget, labels: bool) -> Result<CurvePoint> {
    let (theta_uep, label) = if labels {
        let reg = binding_components(r, DmcScheme::Uep, budget, BINDING_TOL)?;
        (reg.theta, reg.label())
    } else {
        let prob = example_at(r)?;
        (dmc_optimize_over(&prob, DmcScheme::Uep, &DmcComponent::UEP, budget)?.value, String::new())
    };
    let prob = example_at(r)?;
    let theta_no_uep = dmc_optimize_over(&prob, DmcScheme::NoUep, &DmcComponent::NO_UEP, budget)?.value;
    Ok(CurvePoint { r, theta_uep, theta_no_uep, label, error: None })
}

/// Exponent with and without UEP at every `r`; failed points keep their row
/// with the error message.
pub fn exponent_curves(rs: &[f64], budget: &SearchBudget, labels: bool) -> Vec<CurvePoint> {
    rs.par_iter()
        .map(|&r| {
            curve_point(r, budget, labels).unwrap_or_else(|e| CurvePoint {
                r,
                theta_uep: f64::NAN,
                theta_no_uep: f64::NAN,
                label: String::new(),
                error: Some(e.to_string()),
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Boundary {
    pub scheme: DmcScheme,
    pub r: f64,
    pub below: String,
    pub above: String,
}

#[derive(Clone, Debug)]
pub struct RegimeTable {
    pub uep: Vec<Boundary>,
    pub no_uep: Vec<Boundary>,
    /// Coarse scan: `(r, label with UEP, label without UEP)`.
    pub scan: Vec<(f64, String, String)>,
}

/// Settings of the regime-boundary search.
#[derive(Clone, Debug)]
pub struct TableSettings {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub resolution: f64,
    pub tol: f64,
    pub budget: SearchBudget,
}

impl Default for TableSettings {
    fn default() -> Self {
        Self { lo: 0.01, hi: 0.49, step: 0.02, resolution: 1e-3, tol: BINDING_TOL, budget: SearchBudget::default() }
    }
}

fn boundaries(scheme: DmcScheme, rs: &[f64], labels: &[String], set: &TableSettings) -> Result<Vec<Boundary>> {
    let mut out = Vec::new();
    for i in 1..rs.len() {
        if labels[i] == labels[i - 1] {
            continue;
        }
        let (mut lo, mut hi) = (rs[i - 1], rs[i]);
        while hi - lo > set.resolution {
            let mid = 0.5 * (lo + hi);
            let l = binding_components(mid, scheme, &set.budget, set.tol)?.label();
            if l == labels[i - 1] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(Boundary { scheme, r: 0.5 * (lo + hi), below: labels[i - 1].clone(), above: labels[i].clone() });
    }
    Ok(out)
}

/// Scans binding labels on a coarse grid and bisects every label change.
pub fn regime_table(set: &TableSettings) -> Result<RegimeTable> {
    let rs = grid(set.lo, set.hi, set.step);
    let scan: Vec<(f64, String, String)> = rs
        .par_iter()
        .map(|&r| -> Result<_> {
            let a = binding_components(r, DmcScheme::Uep, &set.budget, set.tol)?.label();
            let b = binding_components(r, DmcScheme::NoUep, &set.budget, set.tol)?.label();
            Ok((r, a, b))
        })
        .collect::<Result<_>>()?;
    let uep_labels: Vec<String> = scan.iter().map(|s| s.1.clone()).collect();
    let no_labels: Vec<String> = scan.iter().map(|s| s.2.clone()).collect();
    Ok(RegimeTable {
        uep: boundaries(DmcScheme::Uep, &rs, &uep_labels, set)?,
        no_uep: boundaries(DmcScheme::NoUep, &rs, &no_labels, set)?,
        scan,
    })
}
