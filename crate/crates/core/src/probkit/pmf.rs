use serde::{Deserialize, Serialize};

use super::channel::Channel;
use crate::error::{Error, Result};

/// Largest alphabet allowed on a single axis.
pub const MAX_ALPHABET: usize = 8;
/// Largest number of entries in any dense tensor.
pub const MAX_ENTRIES: usize = 1_000_000;
/// Absolute tolerance for "sums to one" checks on user supplied data.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A named finite alphabet `{0, .., size-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    pub name: String,
    pub size: usize,
}

impl Alphabet {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Self { name: name.into(), size }
    }
}

/// Checks names are distinct and sizes in range; returns the entry count.
pub(crate) fn validate_axes(axes: &[Alphabet]) -> Result<usize> {
    let mut len = 1usize;
    for (i, a) in axes.iter().enumerate() {
        if a.size == 0 || a.size > MAX_ALPHABET {
            return Err(Error::AlphabetSize {
                name: a.name.clone(),
                size: a.size,
                max: MAX_ALPHABET,
            });
        }
        if axes[..i].iter().any(|b| b.name == a.name) {
            return Err(Error::DuplicateAxis(a.name.clone()));
        }
        len = len.saturating_mul(a.size);
        if len > MAX_ENTRIES {
            return Err(Error::TooLarge(len));
        }
    }
    Ok(len)
}

pub(crate) fn strides(axes: &[Alphabet]) -> Vec<usize> {
    let mut s = vec![1; axes.len()];
    for i in (0..axes.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * axes[i + 1].size;
    }
    s
}

pub(crate) fn entry_count(axes: &[Alphabet]) -> usize {
    axes.iter().map(|a| a.size).product()
}

/// Visits every multi-index of `sizes` in row-major order.
pub(crate) fn for_each_index(sizes: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let len: usize = sizes.iter().product();
    let mut coords = vec![0usize; sizes.len()];
    for flat in 0..len {
        f(flat, &coords);
        for k in (0..sizes.len()).rev() {
            coords[k] += 1;
            if coords[k] < sizes[k] {
                break;
            }
            coords[k] = 0;
        }
    }
}

/// For each flat index over `axes`, the flat index of its restriction to the
/// axes at `positions` (in that order).
pub(crate) fn index_map(axes: &[Alphabet], positions: &[usize]) -> Vec<usize> {
    let sub: Vec<Alphabet> = positions.iter().map(|&p| axes[p].clone()).collect();
    let sub_strides = strides(&sub);
    let sizes: Vec<usize> = axes.iter().map(|a| a.size).collect();
    let mut out = vec![0usize; entry_count(axes)];
    for_each_index(&sizes, |flat, coords| {
        out[flat] = positions
            .iter()
            .zip(&sub_strides)
            .map(|(&p, &s)| coords[p] * s)
            .sum();
    });
    out
}

pub(crate) fn positions_of(axes: &[Alphabet], names: &[&str]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(names.len());
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(Error::DuplicateAxis(n.to_string()));
        }
        let p = axes
            .iter()
            .position(|a| a.name == *n)
            .ok_or_else(|| Error::UnknownAxis(n.to_string()))?;
        out.push(p);
    }
    Ok(out)
}

pub(crate) fn check_entries(values: &[f64]) -> Result<()> {
    for &v in values {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidEntry(v));
        }
    }
    Ok(())
}

/// Dense joint probability mass function over named axes, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfDoc", into = "PmfDoc")]
pub struct JointPmf {
    axes: Vec<Alphabet>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PmfDoc {
    axes: Vec<Alphabet>,
    probs: Vec<f64>,
}

impl TryFrom<PmfDoc> for JointPmf {
    type Error = Error;
    fn try_from(d: PmfDoc) -> Result<Self> {
        JointPmf::new(d.axes, d.probs)
    }
}

impl From<JointPmf> for PmfDoc {
    fn from(p: JointPmf) -> Self {
        PmfDoc { axes: p.axes, probs: p.probs }
    }
}

impl JointPmf {
    /// Validated constructor: non-negative finite entries summing to one.
    pub fn new(axes: Vec<Alphabet>, probs: Vec<f64>) -> Result<Self> {
        let len = validate_axes(&axes)?;
        if probs.len() != len {
            return Err(Error::Shape { expected: len, got: probs.len() });
        }
        check_entries(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Self { axes, probs })
    }

    /// Builds a pmf from non-negative weights, dividing by their total.
    pub fn from_weights(axes: Vec<Alphabet>, weights: Vec<f64>) -> Result<Self> {
        let len = validate_axes(&axes)?;
        if weights.len() != len {
            return Err(Error::Shape { expected: len, got: weights.len() });
        }
        check_entries(&weights)?;
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::ZeroProbabilityEvent);
        }
        let probs = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { axes, probs })
    }

    pub fn from_fn(axes: Vec<Alphabet>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = validate_axes(&axes)?;
        let mut probs = vec![0.0; len];
        let sizes: Vec<usize> = axes.iter().map(|a| a.size).collect();
        for_each_index(&sizes, |flat, c| probs[flat] = f(c));
        Self::new(axes, probs)
    }

    pub fn uniform(axes: Vec<Alphabet>) -> Result<Self> {
        let len = validate_axes(&axes)?;
        Ok(Self { axes, probs: vec![1.0 / len as f64; len] })
    }

    /// Internal constructor for results of exact operations on valid pmfs.
    pub(crate) fn from_parts(axes: Vec<Alphabet>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(entry_count(&axes), probs.len());
        Self { axes, probs }
    }

    pub fn axes(&self) -> &[Alphabet] {
        &self.axes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn axis_names(&self) -> Vec<&str> {
        self.axes.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn has_axis(&self, name: &str) -> bool {
        self.axes.iter().any(|a| a.name == name)
    }

    pub fn size_of(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.size)
            .ok_or_else(|| Error::UnknownAxis(name.to_string()))
    }

    /// Probability of one multi-index, given in axis order.
    pub fn get(&self, idx: &[usize]) -> f64 {
        let s = strides(&self.axes);
        self.probs[idx.iter().zip(&s).map(|(i, s)| i * s).sum::<usize>()]
    }

    /// Marginal on `names`, with axes in the requested order.
    pub fn marginal(&self, names: &[&str]) -> Result<JointPmf> {
        let pos = positions_of(&self.axes, names)?;
        let axes: Vec<Alphabet> = pos.iter().map(|&p| self.axes[p].clone()).collect();
        let map = index_map(&self.axes, &pos);
        let mut probs = vec![0.0; entry_count(&axes)];
        for (i, &m) in map.iter().enumerate() {
            probs[m] += self.probs[i];
        }
        Ok(Self { axes, probs })
    }

    /// Reorders the axes; `order` must name every axis exactly once.
    pub fn permuted(&self, order: &[&str]) -> Result<JointPmf> {
        if order.len() != self.axes.len() {
            return Err(Error::AxisMismatch(format!(
                "permutation names {} axes, pmf has {}",
                order.len(),
                self.axes.len()
            )));
        }
        self.marginal(order)
    }

    /// Conditional law of `outputs` given `given`, as a channel. Rows for
    /// conditioning values of probability zero are set uniform.
    pub fn conditional(&self, outputs: &[&str], given: &[&str]) -> Result<Channel> {
        if let Some(o) = outputs.iter().find(|o| given.contains(o)) {
            return Err(Error::OverlappingAxes(o.to_string()));
        }
        let names: Vec<&str> = given.iter().chain(outputs).copied().collect();
        let joint = self.marginal(&names)?;
        let in_axes: Vec<Alphabet> = joint.axes[..given.len()].to_vec();
        let out_axes: Vec<Alphabet> = joint.axes[given.len()..].to_vec();
        let width = entry_count(&out_axes);
        let mut kernel = joint.probs;
        for row in kernel.chunks_mut(width) {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            } else {
                row.iter_mut().for_each(|v| *v = 1.0 / width as f64);
            }
        }
        Ok(Channel::from_parts(in_axes, out_axes, kernel))
    }

    /// Restricts to `axis = value` for each pair, drops those axes and
    /// renormalizes.
    pub fn condition_on(&self, fixed: &[(&str, usize)]) -> Result<JointPmf> {
        let names: Vec<&str> = fixed.iter().map(|f| f.0).collect();
        let pos = positions_of(&self.axes, &names)?;
        for (&(n, v), &p) in fixed.iter().zip(&pos) {
            if v >= self.axes[p].size {
                return Err(Error::InvalidArgument(format!("value {v} out of range for `{n}`")));
            }
        }
        let keep: Vec<usize> = (0..self.axes.len()).filter(|i| !pos.contains(i)).collect();
        let axes: Vec<Alphabet> = keep.iter().map(|&k| self.axes[k].clone()).collect();
        let map = index_map(&self.axes, &keep);
        let sizes: Vec<usize> = self.axes.iter().map(|a| a.size).collect();
        let mut probs = vec![0.0; entry_count(&axes)];
        for_each_index(&sizes, |flat, c| {
            if fixed.iter().zip(&pos).all(|(&(_, v), &p)| c[p] == v) {
                probs[map[flat]] += self.probs[flat];
            }
        });
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroProbabilityEvent);
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Self { axes, probs })
    }

    /// Joint law of these axes and the channel outputs: `p(a) K(b | a_in)`.
    /// Channel inputs must be axes of `self`; outputs must be new names.
    pub fn compose(&self, ch: &Channel) -> Result<JointPmf> {
        let in_names: Vec<&str> = ch.inputs().iter().map(|a| a.name.as_str()).collect();
        let pos = positions_of(&self.axes, &in_names)?;
        for (a, &p) in ch.inputs().iter().zip(&pos) {
            if self.axes[p].size != a.size {
                return Err(Error::AxisMismatch(format!(
                    "channel input `{}` has size {}, pmf axis has {}",
                    a.name, a.size, self.axes[p].size
                )));
            }
        }
        if let Some(o) = ch.outputs().iter().find(|o| self.has_axis(&o.name)) {
            return Err(Error::OverlappingAxes(o.name.clone()));
        }
        let mut axes = self.axes.clone();
        axes.extend(ch.outputs().iter().cloned());
        validate_axes(&axes)?;
        let map = index_map(&self.axes, &pos);
        let width = ch.output_len();
        let mut probs = Vec::with_capacity(self.probs.len() * width);
        for (i, &p) in self.probs.iter().enumerate() {
            let row = ch.row(map[i]);
            probs.extend(row.iter().map(|k| p * k));
        }
        Ok(Self { axes, probs })
    }

    /// Independent product; axis names must be disjoint.
    pub fn product(&self, other: &JointPmf) -> Result<JointPmf> {
        if let Some(o) = other.axes.iter().find(|o| self.has_axis(&o.name)) {
            return Err(Error::OverlappingAxes(o.name.clone()));
        }
        let mut axes = self.axes.clone();
        axes.extend(other.axes.iter().cloned());
        validate_axes(&axes)?;
        let mut probs = Vec::with_capacity(self.probs.len() * other.probs.len());
        for &a in &self.probs {
            probs.extend(other.probs.iter().map(|b| a * b));
        }
        Ok(Self { axes, probs })
    }

    pub fn rename(&self, from: &str, to: &str) -> Result<JointPmf> {
        let p = positions_of(&self.axes, &[from])?[0];
        if from != to && self.has_axis(to) {
            return Err(Error::DuplicateAxis(to.to_string()));
        }
        let mut out = self.clone();
        out.axes[p].name = to.to_string();
        Ok(out)
    }

    /// Largest absolute entry difference after aligning axes by name.
    pub fn max_abs_diff(&self, other: &JointPmf) -> Result<f64> {
        let other = other.aligned_to(self)?;
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `self` with axes reordered to match `target`'s axis order.
    pub(crate) fn aligned_to(&self, target: &JointPmf) -> Result<JointPmf> {
        if self.axes.len() != target.axes.len() {
            return Err(Error::AxisMismatch(format!(
                "{:?} vs {:?}",
                self.axis_names(),
                target.axis_names()
            )));
        }
        if self.axes == target.axes {
            return Ok(self.clone());
        }
        let out = self.permuted(&target.axis_names())?;
        if out.axes != target.axes {
            return Err(Error::AxisMismatch(format!(
                "{:?} vs {:?}",
                self.axes, target.axes
            )));
        }
        Ok(out)
    }

    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }
}
