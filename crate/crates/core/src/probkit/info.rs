//! Entropies, divergences and empirical types. Logarithms are base 2 and
//! `0 log 0 = 0`.

use super::pmf::{strides, validate_axes, Alphabet, JointPmf};
use crate::error::{Error, Result};

/// `-sum p log2 p` over raw weights.
pub(crate) fn entropy_of(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// `sum p log2(p/q)`, `+inf` when `p > 0 = q`.
pub(crate) fn kl_of(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            d += a * (a / b).log2();
        }
    }
    d
}

fn disjoint(sets: &[&[&str]]) -> Result<()> {
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if let Some(x) = a.iter().find(|x| b.contains(x)) {
                return Err(Error::OverlappingAxes(x.to_string()));
            }
        }
    }
    Ok(())
}

fn joined<'a>(sets: &[&[&'a str]]) -> Vec<&'a str> {
    sets.iter().flat_map(|s| s.iter().copied()).collect()
}

/// Joint entropy `H(axes)`.
pub fn entropy(p: &JointPmf, axes: &[&str]) -> Result<f64> {
    if axes.is_empty() {
        return Ok(0.0);
    }
    Ok(entropy_of(p.marginal(axes)?.probs()))
}

/// `H(target | given)`.
pub fn conditional_entropy(p: &JointPmf, target: &[&str], given: &[&str]) -> Result<f64> {
    disjoint(&[target, given])?;
    Ok(entropy(p, &joined(&[target, given]))? - entropy(p, given)?)
}

/// `I(a ; b | given)`.
pub fn mutual_information(p: &JointPmf, a: &[&str], b: &[&str], given: &[&str]) -> Result<f64> {
    disjoint(&[a, b, given])?;
    Ok(entropy(p, &joined(&[a, given]))? + entropy(p, &joined(&[b, given]))?
        - entropy(p, &joined(&[a, b, given]))?
        - entropy(p, given)?)
}

/// `D(p || q)` in bits. Axes are aligned by name; `+inf` outside `q`'s support.
pub fn kl_divergence(p: &JointPmf, q: &JointPmf) -> Result<f64> {
    let q = q.aligned_to(p)?;
    Ok(kl_of(p.probs(), q.probs()))
}

/// Joint type of equal-length symbol sequences, one per axis.
pub fn empirical_type(axes: &[Alphabet], seqs: &[&[usize]]) -> Result<JointPmf> {
    validate_axes(axes)?;
    if seqs.len() != axes.len() {
        return Err(Error::Sequence(format!(
            "{} sequences for {} axes",
            seqs.len(),
            axes.len()
        )));
    }
    let n = seqs.first().map_or(0, |s| s.len());
    if n == 0 {
        return Err(Error::Sequence("empty sequence".into()));
    }
    if seqs.iter().any(|s| s.len() != n) {
        return Err(Error::Sequence("sequences have different lengths".into()));
    }
    let st = strides(axes);
    let mut counts = vec![0.0; st[0] * axes[0].size];
    for t in 0..n {
        let mut idx = 0;
        for (k, s) in seqs.iter().enumerate() {
            if s[t] >= axes[k].size {
                return Err(Error::Sequence(format!(
                    "symbol {} outside alphabet `{}`",
                    s[t], axes[k].name
                )));
            }
            idx += s[t] * st[k];
        }
        counts[idx] += 1.0;
    }
    JointPmf::from_weights(axes.to_vec(), counts)
}
