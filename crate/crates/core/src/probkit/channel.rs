use serde::{Deserialize, Serialize};

use super::pmf::{check_entries, entry_count, for_each_index, validate_axes, Alphabet, NORMALIZATION_TOL};
use crate::error::{Error, Result};

/// Conditional pmf `K(outputs | inputs)`, stored row-major with the input
/// axes first. Every row (one input configuration) sums to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelDoc", into = "ChannelDoc")]
pub struct Channel {
    inputs: Vec<Alphabet>,
    outputs: Vec<Alphabet>,
    kernel: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ChannelDoc {
    inputs: Vec<Alphabet>,
    outputs: Vec<Alphabet>,
    kernel: Vec<f64>,
}

impl TryFrom<ChannelDoc> for Channel {
    type Error = Error;
    fn try_from(d: ChannelDoc) -> Result<Self> {
        Channel::new(d.inputs, d.outputs, d.kernel)
    }
}

impl From<Channel> for ChannelDoc {
    fn from(c: Channel) -> Self {
        ChannelDoc { inputs: c.inputs, outputs: c.outputs, kernel: c.kernel }
    }
}

impl Channel {
    pub fn new(inputs: Vec<Alphabet>, outputs: Vec<Alphabet>, kernel: Vec<f64>) -> Result<Self> {
        let all: Vec<Alphabet> = inputs.iter().chain(&outputs).cloned().collect();
        let len = validate_axes(&all)?;
        if outputs.is_empty() {
            return Err(Error::InvalidArgument("channel needs at least one output axis".into()));
        }
        if kernel.len() != len {
            return Err(Error::Shape { expected: len, got: kernel.len() });
        }
        check_entries(&kernel)?;
        let width = entry_count(&outputs);
        for (row, chunk) in kernel.chunks(width).enumerate() {
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::NotStochastic { row, sum });
            }
        }
        Ok(Self { inputs, outputs, kernel })
    }

    /// `f(input, output)` gives the kernel entry.
    pub fn from_fn(
        inputs: Vec<Alphabet>,
        outputs: Vec<Alphabet>,
        mut f: impl FnMut(&[usize], &[usize]) -> f64,
    ) -> Result<Self> {
        let all: Vec<Alphabet> = inputs.iter().chain(&outputs).cloned().collect();
        let len = validate_axes(&all)?;
        let sizes: Vec<usize> = all.iter().map(|a| a.size).collect();
        let ni = inputs.len();
        let mut kernel = vec![0.0; len];
        for_each_index(&sizes, |flat, c| kernel[flat] = f(&c[..ni], &c[ni..]));
        Self::new(inputs, outputs, kernel)
    }

    /// Deterministic map onto a single output axis.
    pub fn deterministic(
        inputs: Vec<Alphabet>,
        output: Alphabet,
        f: impl Fn(&[usize]) -> usize,
    ) -> Result<Self> {
        let size = output.size;
        for_each_check(&inputs, &f, size)?;
        Self::from_fn(inputs, vec![output], |i, o| if f(i) == o[0] { 1.0 } else { 0.0 })
    }

    /// Rows given directly as stochastic vectors over the flattened outputs.
    pub fn from_rows(inputs: Vec<Alphabet>, outputs: Vec<Alphabet>, rows: &[Vec<f64>]) -> Result<Self> {
        let kernel: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(inputs, outputs, kernel)
    }

    pub(crate) fn from_parts(inputs: Vec<Alphabet>, outputs: Vec<Alphabet>, kernel: Vec<f64>) -> Self {
        Self { inputs, outputs, kernel }
    }

    pub fn inputs(&self) -> &[Alphabet] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Alphabet] {
        &self.outputs
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn input_len(&self) -> usize {
        entry_count(&self.inputs)
    }

    pub fn output_len(&self) -> usize {
        entry_count(&self.outputs)
    }

    /// Row for a flat input index.
    pub fn row(&self, input: usize) -> &[f64] {
        let w = self.output_len();
        &self.kernel[input * w..(input + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.kernel.chunks(self.output_len())
    }

    pub fn rename_input(&self, from: &str, to: &str) -> Result<Channel> {
        let mut out = self.clone();
        let a = out
            .inputs
            .iter_mut()
            .find(|a| a.name == from)
            .ok_or_else(|| Error::UnknownAxis(from.to_string()))?;
        a.name = to.to_string();
        let all: Vec<Alphabet> = out.inputs.iter().chain(&out.outputs).cloned().collect();
        validate_axes(&all)?;
        Ok(out)
    }

    pub fn rename_output(&self, from: &str, to: &str) -> Result<Channel> {
        let mut out = self.clone();
        let a = out
            .outputs
            .iter_mut()
            .find(|a| a.name == from)
            .ok_or_else(|| Error::UnknownAxis(from.to_string()))?;
        a.name = to.to_string();
        let all: Vec<Alphabet> = out.inputs.iter().chain(&out.outputs).cloned().collect();
        validate_axes(&all)?;
        Ok(out)
    }

    /// Largest absolute kernel difference; axes must match exactly.
    pub fn max_abs_diff(&self, other: &Channel) -> Result<f64> {
        if self.inputs != other.inputs || self.outputs != other.outputs {
            return Err(Error::AxisMismatch("channel axes differ".into()));
        }
        Ok(self
            .kernel
            .iter()
            .zip(&other.kernel)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn for_each_check(inputs: &[Alphabet], f: &impl Fn(&[usize]) -> usize, size: usize) -> Result<()> {
    let sizes: Vec<usize> = inputs.iter().map(|a| a.size).collect();
    let mut bad = None;
    for_each_index(&sizes, |_, c| {
        let v = f(c);
        if v >= size && bad.is_none() {
            bad = Some(v);
        }
    });
    match bad {
        Some(v) => Err(Error::InvalidArgument(format!("map value {v} outside output alphabet"))),
        None => Ok(()),
    }
}
