//! Hypothesis-testing problem documents and exponent reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::probkit::{Channel, JointPmf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Dmc,
    Mac,
    Bc,
}

/// Laws of the observations under `H = 0` (`p`) and `H = 1` (`q`), plus the
/// communication channel.
///
/// Axis roles are fixed by name: point-to-point problems use `X`, `Y` and a
/// channel `W -> V`; multiple-access problems use sources `X1`, `X2`, any
/// further axes as receiver side information, and a channel
/// `(W1, W2) -> V` (or `-> (V1, V2)` when orthogonal); broadcast problems
/// use `X`, `Y1`, `Y2` and a channel `W -> (V1, V2)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisProblem {
    pub p: JointPmf,
    pub q: JointPmf,
    pub channel: Channel,
    pub variant: Variant,
}

fn names(axes: &[crate::probkit::Alphabet]) -> Vec<&str> {
    axes.iter().map(|a| a.name.as_str()).collect()
}

fn same_set(got: &[&str], want: &[&str]) -> bool {
    got.len() == want.len() && want.iter().all(|w| got.contains(w))
}

impl HypothesisProblem {
    pub fn new(p: JointPmf, q: JointPmf, channel: Channel, variant: Variant) -> Result<Self> {
        let prob = Self { p, q, channel, variant };
        prob.validate()?;
        Ok(prob)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.axes() != self.q.axes() {
            return Err(Error::AxisMismatch("p and q must share axes in the same order".into()));
        }
        let src = self.p.axis_names();
        let cin = names(self.channel.inputs());
        let cout = names(self.channel.outputs());
        let (ok_src, ok_ch) = match self.variant {
            Variant::Dmc => (same_set(&src, &["X", "Y"]), cin == ["W"] && cout == ["V"]),
            Variant::Mac => (
                src.contains(&"X1") && src.contains(&"X2") && src.len() >= 3,
                same_set(&cin, &["W1", "W2"]) && (cout == ["V"] || same_set(&cout, &["V1", "V2"])),
            ),
            Variant::Bc => (same_set(&src, &["X", "Y1", "Y2"]), cin == ["W"] && same_set(&cout, &["V1", "V2"])),
        };
        if !ok_src {
            return Err(Error::AxisMismatch(format!("source axes {src:?} do not fit a {:?} problem", self.variant)));
        }
        if !ok_ch {
            return Err(Error::AxisMismatch(format!(
                "channel {cin:?} -> {cout:?} does not fit a {:?} problem",
                self.variant
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let prob: Self = serde_json::from_str(text)?;
        prob.validate()?;
        Ok(prob)
    }

    /// Receiver-side axes of a multiple-access problem.
    pub fn side_axes(&self) -> Vec<&str> {
        self.p.axis_names().into_iter().filter(|n| *n != "X1" && *n != "X2").collect()
    }
}

/// A value in bits that may be `+inf`; serialized as a number or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Bits(pub f64);

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0.is_nan() {
            s.serialize_str("nan")
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Bits(v)),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(Bits(f64::INFINITY)),
                "-inf" => Ok(Bits(f64::NEG_INFINITY)),
                "nan" => Ok(Bits(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

/// Common summary of an achievable exponent: the minimum over named
/// components, which component attains it, and whether the auxiliary choice
/// satisfies the rate condition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentReport {
    pub theta: Bits,
    pub components: BTreeMap<String, Bits>,
    pub active: String,
    pub feasible: bool,
}

impl ExponentReport {
    /// Builds the report from `(name, value)` pairs; ties go to the first.
    pub fn from_components(components: &[(&str, f64)], feasible: bool) -> Self {
        let (active, theta) = components
            .iter()
            .fold(("", f64::INFINITY), |acc, &(n, v)| if v < acc.1 || acc.0.is_empty() { (n, v) } else { acc });
        Self {
            theta: Bits(theta),
            components: components.iter().map(|&(n, v)| (n.to_string(), Bits(v))).collect(),
            active: active.to_string(),
            feasible,
        }
    }

    /// Names of components within `tol` of the minimum.
    pub fn active_set(&self, tol: f64) -> Vec<String> {
        self.components
            .iter()
            .filter(|(_, v)| v.0 <= self.theta.0 + tol)
            .map(|(n, _)| n.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probkit::{bernoulli, bsc};

    #[test]
    fn bits_round_trip_through_json() {
        let r = ExponentReport::from_components(&[("a", 0.5), ("b", f64::INFINITY)], true);
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"inf\""));
        let back: ExponentReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.components["b"].0, f64::INFINITY);
        assert_eq!(back.active, "a");
    }

    #[test]
    fn dmc_roles_are_checked() {
        let p = bernoulli("X", 0.2).unwrap().compose(&bsc("X", "Y", 0.3).unwrap()).unwrap();
        let ch = bsc("W", "V", 0.1).unwrap();
        assert!(HypothesisProblem::new(p.clone(), p.clone(), ch.clone(), Variant::Dmc).is_ok());
        assert!(HypothesisProblem::new(p.clone(), p.clone(), ch.clone(), Variant::Bc).is_err());
        let wrong = bsc("A", "V", 0.1).unwrap();
        assert!(HypothesisProblem::new(p.clone(), p, wrong, Variant::Dmc).is_err());
    }
}
