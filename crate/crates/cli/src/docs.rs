//! Input documents. Each command reads one JSON document; parse failures
//! name the field path plus the line and column where parsing stopped.

use std::fs;
use std::path::Path;

use dht_core::bc::{BcDiffAux, BcEqualAux, BcLabeling};
use dht_core::dmc::{binary_example, DmcAux};
use dht_core::mac::MacAux;
use dht_core::probkit::Channel;
use dht_core::problem::HypothesisProblem;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// A malformed or inconsistent input; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InputError(pub String);

impl InputError {
    /// Prefixes the message with the document it came from.
    pub fn at(self, path: &Path) -> Self {
        Self(format!("{}: {}", path.display(), self.0))
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, InputError> {
    let text = fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| e.at(path))
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, InputError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            InputError(inner.to_string())
        } else {
            InputError(format!("field `{path}`: {inner}"))
        }
    })
}

fn invalid(field: &str, e: impl std::fmt::Display) -> InputError {
    InputError(format!("field `{field}`: {e}"))
}

/// The binary source pair over a BSC, by its four parameters.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryDoc {
    pub p0: f64,
    pub q0: f64,
    pub p1: f64,
    pub r: f64,
}

/// A point-to-point problem given either in full or by the binary shorthand.
fn resolve_problem(problem: &Option<HypothesisProblem>, binary: &Option<BinaryDoc>) -> Result<HypothesisProblem, InputError> {
    match (problem, binary) {
        (Some(p), None) => {
            p.validate().map_err(|e| invalid("problem", e))?;
            Ok(p.clone())
        }
        (None, Some(b)) => binary_example(b.p0, b.q0, b.p1, b.r).map_err(|e| invalid("binary", e)),
        _ => Err(InputError("exactly one of `problem` and `binary` is required".into())),
    }
}

fn rows_of(ch: &Channel) -> Vec<Vec<f64>> {
    ch.rows().map(<[f64]>::to_vec).collect()
}

/// Point-to-point auxiliary as row lists: quantizer rows per `x`, `t` over
/// the channel inputs, code rows per `t`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmcAuxDoc {
    pub s: Vec<Vec<f64>>,
    pub t: Vec<f64>,
    pub w: Vec<Vec<f64>>,
}

impl DmcAuxDoc {
    pub fn build(&self, prob: &HypothesisProblem) -> Result<DmcAux, InputError> {
        let aux = DmcAux::from_rows(&self.s, &self.t, &self.w).map_err(|e| invalid("aux", e))?;
        aux.check(prob).map_err(|e| invalid("aux", e))?;
        Ok(aux)
    }

    pub fn of(aux: &DmcAux) -> Self {
        Self { s: aux.s_rows(), t: aux.t.probs().to_vec(), w: aux.w_rows() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmcDoc {
    #[serde(default)]
    pub problem: Option<HypothesisProblem>,
    #[serde(default)]
    pub binary: Option<BinaryDoc>,
    #[serde(default)]
    pub aux: Option<DmcAuxDoc>,
}

impl DmcDoc {
    pub fn resolve(&self) -> Result<(HypothesisProblem, Option<DmcAux>), InputError> {
        let prob = resolve_problem(&self.problem, &self.binary)?;
        let aux = self.aux.as_ref().map(|a| a.build(&prob)).transpose()?;
        Ok((prob, aux))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateDoc {
    #[serde(default)]
    pub problem: Option<HypothesisProblem>,
    #[serde(default)]
    pub binary: Option<BinaryDoc>,
    pub aux: DmcAuxDoc,
}

impl SimulateDoc {
    pub fn resolve(&self) -> Result<(HypothesisProblem, DmcAux), InputError> {
        let prob = resolve_problem(&self.problem, &self.binary)?;
        let aux = self.aux.build(&prob)?;
        Ok((prob, aux))
    }
}

/// MAC auxiliary: `t` over `W1 x W2`, quantizer rows per `(x_i, t1, t2)`,
/// and the maps `f_i` indexed by `s * |X_i| + x`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacAuxDoc {
    pub t: Vec<f64>,
    pub s1: Vec<Vec<f64>>,
    pub s2: Vec<Vec<f64>>,
    pub f1: Vec<usize>,
    pub f2: Vec<usize>,
}

impl MacAuxDoc {
    pub fn build(&self, prob: &HypothesisProblem) -> Result<MacAux, InputError> {
        MacAux::from_rows(prob, &self.t, &self.s1, &self.s2, self.f1.clone(), self.f2.clone()).map_err(|e| invalid("aux", e))
    }

    pub fn of(aux: &MacAux) -> Self {
        Self {
            t: aux.t.probs().to_vec(),
            s1: rows_of(&aux.s1),
            s2: rows_of(&aux.s2),
            f1: aux.f1.clone(),
            f2: aux.f2.clone(),
        }
    }
}

fn default_s_sizes() -> [usize; 2] {
    [2, 2]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacDoc {
    pub problem: HypothesisProblem,
    #[serde(default)]
    pub aux: Option<MacAuxDoc>,
    /// Quantizer alphabet sizes for the search when no auxiliary is given.
    #[serde(default = "default_s_sizes")]
    pub s_sizes: [usize; 2],
    /// Fixes the maps during the search instead of enumerating them.
    #[serde(default)]
    pub maps: Option<(Vec<usize>, Vec<usize>)>,
}

/// Auxiliary of the equal-marginals scheme: `t` over the channel inputs,
/// code rows per `(x, t)` over `(s, u1, u2)` and the map `f`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcEqualDoc {
    pub t: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub sizes: (usize, usize, usize),
    pub f: Vec<usize>,
}

/// Auxiliary of the different-marginals scheme, one entry per receiver.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcDiffDoc {
    pub s: [Vec<Vec<f64>>; 2],
    pub t: Vec<f64>,
    pub ti: [Vec<Vec<f64>>; 2],
    pub w: [Vec<Vec<f64>>; 2],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcDoc {
    pub problem: HypothesisProblem,
    /// Hypothesis favoured by each receiver.
    pub labeling: [u8; 2],
    #[serde(default)]
    pub equal: Option<BcEqualDoc>,
    #[serde(default)]
    pub different: Option<BcDiffDoc>,
}

pub enum BcAux {
    Equal(BcEqualAux),
    Different(BcDiffAux),
}

impl BcDoc {
    pub fn resolve(&self) -> Result<(HypothesisProblem, BcLabeling, BcAux), InputError> {
        self.problem.validate().map_err(|e| invalid("problem", e))?;
        let labeling = BcLabeling::new(self.labeling[0], self.labeling[1]).map_err(|e| invalid("labeling", e))?;
        let prob = &self.problem;
        let aux = match (&self.equal, &self.different) {
            (Some(a), None) => BcAux::Equal(
                BcEqualAux::from_rows(prob, &a.t, &a.rows, a.sizes, a.f.clone()).map_err(|e| invalid("equal", e))?,
            ),
            (None, Some(a)) => BcAux::Different(
                BcDiffAux::from_rows(
                    prob,
                    [&a.s[0], &a.s[1]],
                    &a.t,
                    [&a.ti[0], &a.ti[1]],
                    [&a.w[0], &a.w[1]],
                )
                .map_err(|e| invalid("different", e))?,
            ),
            _ => return Err(InputError("exactly one of `equal` and `different` is required".into())),
        };
        Ok((prob.clone(), labeling, aux))
    }
}
