//! Special cases with simpler expressions: generalized testing against
//! conditional independence (hybrid and separate coding), and the optimal
//! exponent for independent sources over orthogonal channels.
//!
//! The side information splits into `Z`, an axis of that name when present,
//! and `Ybar`, every other side axis. Under `H = 1` the law must factor as
//! `P_{X1 X2 Z} Q_{Ybar | Z}`.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{require_mac, MacAux, MacModel, FEASIBILITY_SLACK};
use crate::error::{Error, Result};
use crate::probkit::{channel_capacity, conditional_entropy, kl_divergence, mutual_information, Alphabet, Channel, JointPmf};
use crate::problem::HypothesisProblem;
use crate::search::{dirichlet_rows, logits_from_rows, maximize, softmax_rows, SearchBudget};

/// Tolerance of the structural checks.
pub const STRUCTURE_TOL: f64 = 1e-9;

/// Separate source-channel coding: source quantizers `S_i | X_i` and a
/// channel code `T1 T2 -> W1, W2` that ignores the sources.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MacSeparateAux {
    pub s1: Channel,
    pub s2: Channel,
    pub t: JointPmf,
    pub w1: Channel,
    pub w2: Channel,
}

#[derive(Clone, Debug)]
pub enum MacGtciAux {
    Hybrid(MacAux),
    Separate(MacSeparateAux),
}

struct Split {
    ybar: Vec<String>,
    z: Vec<String>,
}

impl Split {
    fn of(prob: &HypothesisProblem) -> Result<Self> {
        let side = prob.side_axes();
        let z: Vec<String> = side.iter().filter(|n| **n == "Z").map(|n| n.to_string()).collect();
        let ybar: Vec<String> = side.iter().filter(|n| **n != "Z").map(|n| n.to_string()).collect();
        if ybar.is_empty() {
            return Err(Error::Precondition("no side information besides Z".into()));
        }
        Ok(Self { ybar, z })
    }

    fn ybar(&self) -> Vec<&str> {
        self.ybar.iter().map(String::as_str).collect()
    }

    fn z(&self) -> Vec<&str> {
        self.z.iter().map(String::as_str).collect()
    }

    fn with<'a>(&'a self, first: &[&'a str], rest: &[&'a str]) -> Vec<&'a str> {
        first.iter().chain(rest).copied().collect()
    }
}

fn max_diff(a: &JointPmf, b: &JointPmf) -> Result<f64> {
    a.max_abs_diff(b)
}

/// Checks `Q = P_{X1 X2 Z} Q_{Ybar | Z}`.
fn check_gtci(prob: &HypothesisProblem, split: &Split) -> Result<()> {
    let not_gtci = |why: &str| Error::Precondition(format!("not a generalized-TCI instance: {why}"));
    let sources = split.with(&["X1", "X2"], &split.z());
    let pxz = prob.p.marginal(&sources)?;
    let qxz = prob.q.marginal(&sources)?;
    if max_diff(&pxz, &qxz)? > STRUCTURE_TOL {
        return Err(not_gtci("(X1, X2, Z) has different laws under the hypotheses"));
    }
    let rebuilt = if split.z.is_empty() {
        qxz.product(&prob.q.marginal(&split.ybar())?)?
    } else {
        let q_y_given_z = prob.q.conditional(&split.ybar(), &split.z())?;
        qxz.compose(&q_y_given_z)?
    };
    if max_diff(&prob.q, &rebuilt)? > STRUCTURE_TOL {
        return Err(not_gtci("Ybar depends on the sources beyond Z under H = 1"));
    }
    Ok(())
}

/// `E_{P_Z} D(P_{Ybar|Z} || Q_{Ybar|Z})`.
fn conditional_divergence(prob: &HypothesisProblem, split: &Split) -> Result<f64> {
    let yz = split.with(&split.ybar(), &split.z());
    let joint = kl_divergence(&prob.p.marginal(&yz)?, &prob.q.marginal(&yz)?)?;
    let z = if split.z.is_empty() { 0.0 } else { kl_divergence(&prob.p.marginal(&split.z())?, &prob.q.marginal(&split.z())?)? };
    Ok(joint - z)
}

fn check(conditions: [(f64, f64); 3]) -> Result<()> {
    for (k, (l, r)) in conditions.iter().enumerate() {
        if *l > r + FEASIBILITY_SLACK {
            return Err(Error::Infeasible(format!("rate condition {} fails: {l} > {r}", k + 1)));
        }
    }
    Ok(())
}

/// Exponent for generalized testing against conditional independence with
/// the given auxiliary.
///
/// Hybrid coding: `E[D(P_{Ybar|Z T V} || Q_{Ybar|Z})] + I(S1,S2; Ybar | Z,T,V)`.
/// Separate coding: `E[D(P_{Ybar|Z} || Q_{Ybar|Z})] + I(S1,S2; Ybar | Z)`.
pub fn mac_gtci(prob: &HypothesisProblem, aux: &MacGtciAux) -> Result<f64> {
    require_mac(prob)?;
    let split = Split::of(prob)?;
    check_gtci(prob, &split)?;
    let d_cond = conditional_divergence(prob, &split)?;
    let (yb, z) = (split.ybar(), split.z());
    match aux {
        MacGtciAux::Hybrid(aux) => {
            let model = MacModel::new(prob, aux)?;
            let j = &model.joint;
            let v: Vec<&str> = prob.channel.outputs().iter().map(|a| a.name.as_str()).collect();
            let ztv: Vec<&str> = z.iter().copied().chain(["T1", "T2"]).chain(v.iter().copied()).collect();
            let mi = |a: &[&str], b: &[&str], given: &[&str]| mutual_information(j, a, b, given);
            let s12 = ["S1", "S2"];
            let zt: Vec<&str> = z.iter().copied().chain(["T1", "T2"]).collect();
            let s2zt: Vec<&str> = std::iter::once("S2").chain(zt.iter().copied()).collect();
            let s1zt: Vec<&str> = std::iter::once("S1").chain(zt.iter().copied()).collect();
            check([
                (mi(&["S1"], &["X1"], &s2zt)?, mi(&["S1"], &v, &s2zt)?),
                (mi(&["S2"], &["X2"], &s1zt)?, mi(&["S2"], &v, &s1zt)?),
                (mi(&s12, &["X1", "X2"], &zt)?, mi(&s12, &v, &zt)?),
            ])?;
            // E[D(P_{Ybar|ZTV} || Q_{Ybar|Z})] = D(P_{Ybar|Z}||Q_{Ybar|Z}) averaged
            // over Z, plus I(Ybar; T,V | Z).
            let gain = conditional_entropy(j, &yb, &z)? - conditional_entropy(j, &yb, &ztv)?;
            Ok(d_cond + gain + mi(&s12, &yb, &ztv)?)
        }
        MacGtciAux::Separate(aux) => {
            let src = separate_source_law(prob, &aux.s1, &aux.s2)?;
            let rates = separate_channel_rates(prob, aux)?;
            let s_info = source_informations(&src, &z)?;
            check([(s_info[0], rates[0]), (s_info[1], rates[1]), (s_info[2], rates[2])])?;
            Ok(d_cond + mutual_information(&src, &["S1", "S2"], &yb, &z)?)
        }
    }
}

fn separate_source_law(prob: &HypothesisProblem, s1: &Channel, s2: &Channel) -> Result<JointPmf> {
    prob.p.compose(s1)?.compose(s2)
}

/// `[I(S1;X1|S2,Z), I(S2;X2|S1,Z), I(S1,S2;X1,X2|Z)]`.
fn source_informations(src: &JointPmf, z: &[&str]) -> Result<[f64; 3]> {
    let s2z: Vec<&str> = std::iter::once("S2").chain(z.iter().copied()).collect();
    let s1z: Vec<&str> = std::iter::once("S1").chain(z.iter().copied()).collect();
    Ok([
        mutual_information(src, &["S1"], &["X1"], &s2z)?,
        mutual_information(src, &["S2"], &["X2"], &s1z)?,
        mutual_information(src, &["S1", "S2"], &["X1", "X2"], z)?,
    ])
}

/// `[I(W1;V|W2,T), I(W2;V|W1,T), I(W1,W2;V|T)]`.
fn separate_channel_rates(prob: &HypothesisProblem, aux: &MacSeparateAux) -> Result<[f64; 3]> {
    let law = aux.t.compose(&aux.w1)?.compose(&aux.w2)?.compose(&prob.channel)?;
    let v: Vec<&str> = prob.channel.outputs().iter().map(|a| a.name.as_str()).collect();
    Ok([
        mutual_information(&law, &["W1"], &v, &["W2", "T1", "T2"])?,
        mutual_information(&law, &["W2"], &v, &["W1", "T1", "T2"])?,
        mutual_information(&law, &["W1", "W2"], &v, &["T1", "T2"])?,
    ])
}

fn mix_rows(rows: &[Vec<f64>], weights: &[f64], lam: f64) -> Vec<Vec<f64>> {
    let ns = rows[0].len();
    let mut centre = vec![0.0; ns];
    for (w, row) in weights.iter().zip(rows) {
        for (c, v) in centre.iter_mut().zip(row) {
            *c += w * v;
        }
    }
    rows.iter()
        .map(|r| r.iter().zip(&centre).map(|(a, b)| (1.0 - lam) * a + lam * b).collect())
        .collect()
}

/// Smallest common mixing weight, found by bisection, that makes `ok` hold.
fn repair_pair(
    s1: &[Vec<f64>],
    s2: &[Vec<f64>],
    px1: &[f64],
    px2: &[f64],
    ok: impl Fn(&[Vec<f64>], &[Vec<f64>]) -> bool,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    if ok(s1, s2) {
        return (s1.to_vec(), s2.to_vec());
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if ok(&mix_rows(s1, px1, mid), &mix_rows(s2, px2, mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (mix_rows(s1, px1, hi), mix_rows(s2, px2, hi))
}

fn quantizer(x: &str, nx: usize, s: &str, rows: &[Vec<f64>]) -> Result<Channel> {
    let ns = rows[0].len();
    Channel::from_rows(vec![Alphabet::new(x, nx)], vec![Alphabet::new(s, ns)], rows)
}

fn near_identity(nx: usize, ns: usize) -> Vec<Vec<f64>> {
    (0..nx)
        .map(|x| {
            let row: Vec<f64> = (0..ns).map(|s| if s == x % ns { 1.0 } else { 1e-6 }).collect();
            let z: f64 = row.iter().sum();
            row.into_iter().map(|v| v / z).collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SeparateOptimum {
    pub value: f64,
    pub aux: MacSeparateAux,
    pub evaluations: usize,
}

/// Maximizes the separate-coding exponent over quantizers with alphabets
/// `s_sizes` and over channel codes.
pub fn mac_separate_optimize(prob: &HypothesisProblem, s_sizes: (usize, usize), budget: &SearchBudget) -> Result<SeparateOptimum> {
    require_mac(prob)?;
    let split = Split::of(prob)?;
    check_gtci(prob, &split)?;
    let d_cond = conditional_divergence(prob, &split)?;
    let d = super::Dims::of(prob)?;
    let (ns1, ns2) = s_sizes;
    let nt = d.w1 * d.w2;
    let px1 = prob.p.marginal(&["X1"])?.probs().to_vec();
    let px2 = prob.p.marginal(&["X2"])?.probs().to_vec();
    let (yb, z) = (split.ybar(), split.z());
    let t_axes = vec![Alphabet::new("T1", d.w1), Alphabet::new("T2", d.w2)];
    let dims = [d.x1 * (ns1 - 1), d.x2 * (ns2 - 1), nt - 1, nt * (d.w1 - 1), nt * (d.w2 - 1)];
    let cut = |x: &[f64], k: usize| -> Vec<f64> {
        let start: usize = dims[..k].iter().sum();
        x[start..start + dims[k]].to_vec()
    };
    let build = |x: &[f64]| -> Result<MacSeparateAux> {
        let t = softmax_rows(&cut(x, 2), 1, nt).remove(0);
        let w1 = softmax_rows(&cut(x, 3), nt, d.w1);
        let w2 = softmax_rows(&cut(x, 4), nt, d.w2);
        let mut aux = MacSeparateAux {
            s1: quantizer("X1", d.x1, "S1", &softmax_rows(&cut(x, 0), d.x1, ns1))?,
            s2: quantizer("X2", d.x2, "S2", &softmax_rows(&cut(x, 1), d.x2, ns2))?,
            t: JointPmf::new(t_axes.clone(), t)?,
            w1: Channel::from_rows(t_axes.clone(), vec![Alphabet::new("W1", d.w1)], &w1)?,
            w2: Channel::from_rows(t_axes.clone(), vec![Alphabet::new("W2", d.w2)], &w2)?,
        };
        let rates = separate_channel_rates(prob, &aux)?;
        let rows = |c: &Channel| c.rows().map(|r| r.to_vec()).collect::<Vec<_>>();
        let ok = |a: &[Vec<f64>], b: &[Vec<f64>]| -> bool {
            let go = || -> Result<bool> {
                let src = separate_source_law(prob, &quantizer("X1", d.x1, "S1", a)?, &quantizer("X2", d.x2, "S2", b)?)?;
                let s = source_informations(&src, &z)?;
                Ok(s.iter().zip(&rates).all(|(l, r)| *l <= r + 0.5 * FEASIBILITY_SLACK))
            };
            go().unwrap_or(false)
        };
        let (a, b) = repair_pair(&rows(&aux.s1), &rows(&aux.s2), &px1, &px2, ok);
        aux.s1 = quantizer("X1", d.x1, "S1", &a)?;
        aux.s2 = quantizer("X2", d.x2, "S2", &b)?;
        Ok(aux)
    };
    let value_of = |aux: &MacSeparateAux| -> Result<f64> {
        let src = separate_source_law(prob, &aux.s1, &aux.s2)?;
        Ok(d_cond + mutual_information(&src, &["S1", "S2"], &yb, &z)?)
    };
    let objective = |x: &[f64]| build(x).and_then(|a| value_of(&a)).unwrap_or(f64::NEG_INFINITY);
    let join = |s1: &[Vec<f64>], s2: &[Vec<f64>], t: &[f64], w1: &[Vec<f64>], w2: &[Vec<f64>]| {
        let mut v = logits_from_rows(s1);
        v.extend(logits_from_rows(s2));
        v.extend(logits_from_rows(&[t.to_vec()]));
        v.extend(logits_from_rows(w1));
        v.extend(logits_from_rows(w2));
        v
    };
    let uniform = |n: usize| vec![1.0 / n as f64; n];
    let anchors = vec![join(
        &near_identity(d.x1, ns1),
        &near_identity(d.x2, ns2),
        &uniform(nt),
        &vec![uniform(d.w1); nt],
        &vec![uniform(d.w2); nt],
    )];
    let init = |rng: &mut ChaCha8Rng| {
        join(
            &dirichlet_rows(rng, d.x1, ns1, 1.0),
            &dirichlet_rows(rng, d.x2, ns2, 1.0),
            &dirichlet_rows(rng, 1, nt, 1.0).remove(0),
            &dirichlet_rows(rng, nt, d.w1, 1.0),
            &dirichlet_rows(rng, nt, d.w2, 1.0),
        )
    };
    let out = maximize(&objective, &anchors, &init, budget);
    let aux = build(&out.point)?;
    Ok(SeparateOptimum { value: value_of(&aux)?, aux, evaluations: out.evaluations })
}

#[derive(Clone, Debug)]
pub struct OrthogonalOptimum {
    pub value: f64,
    pub divergence_y: f64,
    pub information: f64,
    pub capacities: (f64, f64),
    pub s1: Vec<Vec<f64>>,
    pub s2: Vec<Vec<f64>>,
}

/// Splits an orthogonal channel `(W1, W2) -> (V1, V2)` into its factors.
fn orthogonal_factors(ch: &Channel) -> Result<(Channel, Channel)> {
    let not_orth = || Error::Precondition("channel does not factor into two orthogonal channels".into());
    let outs: Vec<&str> = ch.outputs().iter().map(|a| a.name.as_str()).collect();
    if outs.len() != 2 || !outs.contains(&"V1") || !outs.contains(&"V2") {
        return Err(not_orth());
    }
    let size = |axes: &[Alphabet], n: &str| axes.iter().find(|a| a.name == n).map(|a| a.size).unwrap_or(0);
    let (w1, w2) = (size(ch.inputs(), "W1"), size(ch.inputs(), "W2"));
    let (v1, v2) = (size(ch.outputs(), "V1"), size(ch.outputs(), "V2"));
    let in_first = ch.inputs()[0].name == "W1";
    let out_first = ch.outputs()[0].name == "V1";
    let entry = |a: usize, b: usize, c: usize, e: usize| {
        let row = ch.row(if in_first { a * w2 + b } else { b * w1 + a });
        row[if out_first { c * v2 + e } else { e * v1 + c }]
    };
    let g1 = Channel::from_fn(vec![Alphabet::new("W1", w1)], vec![Alphabet::new("V1", v1)], |i, o| {
        (0..v2).map(|e| entry(i[0], 0, o[0], e)).sum()
    })?;
    let g2 = Channel::from_fn(vec![Alphabet::new("W2", w2)], vec![Alphabet::new("V2", v2)], |i, o| {
        (0..v1).map(|c| entry(0, i[0], c, o[0])).sum()
    })?;
    for a in 0..w1 {
        for b in 0..w2 {
            for c in 0..v1 {
                for e in 0..v2 {
                    if (entry(a, b, c, e) - g1.row(a)[c] * g2.row(b)[e]).abs() > STRUCTURE_TOL {
                        return Err(not_orth());
                    }
                }
            }
        }
    }
    Ok((g1, g2))
}

fn check_independent_sources(prob: &HypothesisProblem) -> Result<()> {
    let fail = |why: &str| Error::Precondition(format!("sources are not independent as required: {why}"));
    let px = prob.p.marginal(&["X1", "X2"])?;
    let prod = prob.p.marginal(&["X1"])?.product(&prob.p.marginal(&["X2"])?)?;
    if max_diff(&px, &prod)? > STRUCTURE_TOL {
        return Err(fail("X1 and X2 are dependent under H = 0"));
    }
    let side = prob.side_axes();
    let rebuilt = px.product(&prob.q.marginal(&side)?)?;
    if max_diff(&prob.q, &rebuilt)? > STRUCTURE_TOL {
        return Err(fail("under H = 1 the law must be P_X1 P_X2 Q_Y"));
    }
    Ok(())
}

/// Optimal exponent with the default search budget.
pub fn orthogonal_optimal(prob: &HypothesisProblem, tol: f64) -> Result<f64> {
    Ok(orthogonal_optimize(prob, tol, &SearchBudget::default())?.value)
}

/// `D(P_Y||Q_Y) + max I(S1,S2;Y)` over `P_{S_i|X_i}` with
/// `I(S1;X1|S2) <= C1`, `I(S2;X2|S1) <= C2`, `I(S1,S2;X1,X2) <= C1 + C2`,
/// where `Y` is all side information and `|S_i| = |X_i| + 1`.
pub fn orthogonal_optimize(prob: &HypothesisProblem, tol: f64, budget: &SearchBudget) -> Result<OrthogonalOptimum> {
    require_mac(prob)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    check_independent_sources(prob)?;
    let (g1, g2) = orthogonal_factors(&prob.channel)?;
    let caps = (channel_capacity(&g1, tol)?, channel_capacity(&g2, tol)?);
    let side = prob.side_axes();
    let divergence_y = kl_divergence(&prob.p.marginal(&side)?, &prob.q.marginal(&side)?)?;
    let (nx1, nx2) = (prob.p.size_of("X1")?, prob.p.size_of("X2")?);
    let (ns1, ns2) = (nx1 + 1, nx2 + 1);
    let px1 = prob.p.marginal(&["X1"])?.probs().to_vec();
    let px2 = prob.p.marginal(&["X2"])?.probs().to_vec();
    let infos = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Result<([f64; 3], f64)> {
        let src = separate_source_law(prob, &quantizer("X1", nx1, "S1", a)?, &quantizer("X2", nx2, "S2", b)?)?;
        Ok((source_informations(&src, &[])?, mutual_information(&src, &["S1", "S2"], &side, &[])?))
    };
    let limits = [caps.0, caps.1, caps.0 + caps.1];
    let ok = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        infos(a, b).map_or(false, |(s, _)| s.iter().zip(&limits).all(|(l, c)| *l <= c + 0.5 * FEASIBILITY_SLACK))
    };
    let split = |x: &[f64]| (softmax_rows(&x[..nx1 * (ns1 - 1)], nx1, ns1), softmax_rows(&x[nx1 * (ns1 - 1)..], nx2, ns2));
    let objective = |x: &[f64]| {
        let (a, b) = split(x);
        let (a, b) = repair_pair(&a, &b, &px1, &px2, ok);
        infos(&a, &b).map_or(f64::NEG_INFINITY, |(_, i)| i)
    };
    let join = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        let mut v = logits_from_rows(a);
        v.extend(logits_from_rows(b));
        v
    };
    let anchors = vec![join(&near_identity(nx1, ns1), &near_identity(nx2, ns2))];
    let init = |rng: &mut ChaCha8Rng| join(&dirichlet_rows(rng, nx1, ns1, 1.0), &dirichlet_rows(rng, nx2, ns2, 1.0));
    let out = maximize(&objective, &anchors, &init, budget);
    let (a, b) = split(&out.point);
    let (s1, s2) = repair_pair(&a, &b, &px1, &px2, ok);
    let information = infos(&s1, &s2)?.1;
    Ok(OrthogonalOptimum { value: divergence_y + information, divergence_y, information, capacities: caps, s1, s2 })
}
