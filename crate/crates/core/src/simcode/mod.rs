//! Monte Carlo simulation of the point-to-point coding and testing scheme:
//! random quantization codebook with binning, a channel codebook
//! superposed on a time-sharing sequence, the fallback input `t^n` when
//! quantization fails, and the receiver's channel decoding followed by
//! minimum-conditional-entropy bin decoding and a typicality test.
//!
//! Typicality is strong typicality with relative slack: a joint type `pi`
//! is in `T_mu(P)` when `|pi(a) - P(a)| <= mu P(a)` for every letter `a`.
//! The codebook is fixed by `SchemeConfig::seed`; every trial draws from
//! its own ChaCha stream, so results do not depend on the thread count.

mod seq;

pub use seq::Seq;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dmc::{require_dmc, DmcAux};
use crate::error::{Error, Result};
use crate::probkit::mutual_information;
use crate::problem::HypothesisProblem;
use seq::{iid, joint2, joint3, pair_masks, samplers, through};

/// Largest codebook, in symbols, that [`build_codebooks`] will allocate.
pub const MAX_CODEBOOK_SYMBOLS: f64 = 1e8;
/// Two-sided 95% normal quantile used by the Wilson intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Relative typicality slack for blocklength `n` following `mu ~ n^{-1/3}`,
/// scaled so that `n = 60` gives `mu60`.
pub fn mu_guideline(n: usize, mu60: f64) -> f64 {
    mu60 * (60.0 / n as f64).cbrt()
}

/// Scheme parameters with rates derived from the auxiliary choice.
#[derive(Clone, Debug)]
pub struct SchemeConfig {
    pub n: usize,
    pub mu: f64,
    pub aux: DmcAux,
    pub seed: u64,
    /// Send `t^n` when quantization fails; otherwise send a random codeword.
    pub uep: bool,
    /// Margin added to (or taken from) the mutual informations when setting
    /// the rates. Defaults to `mu`; at short blocklengths the typicality
    /// slack has to be far larger than a useful rate margin.
    pub rate_margin: f64,
    /// Message rate `R`, bits per symbol.
    pub rate: f64,
    /// Bin rate `R'`.
    pub bin_rate: f64,
    /// `I(S;X)`.
    pub source_info: f64,
    /// `I(W;V|T)`.
    pub channel_info: f64,
    prob: HypothesisProblem,
    laws: Laws,
}

#[derive(Clone, Debug)]
struct Laws {
    nx: usize,
    ny: usize,
    ns: usize,
    nw: usize,
    nv: usize,
    /// `P_{SX}`, `P_{SY}`, `P_{TWV}` flattened row-major.
    sx: Vec<f64>,
    sy: Vec<f64>,
    twv: Vec<f64>,
    s: Vec<f64>,
    t: Vec<f64>,
    w_given_t: Vec<Vec<f64>>,
    channel: Vec<Vec<f64>>,
    /// `(X, Y)` laws under `H = 0` and `H = 1`.
    xy: [Vec<f64>; 2],
}

impl SchemeConfig {
    pub fn new(prob: &HypothesisProblem, aux: &DmcAux, n: usize, mu: f64, seed: u64) -> Result<Self> {
        require_dmc(prob)?;
        aux.check(prob)?;
        if n == 0 {
            return Err(Error::InvalidArgument("blocklength must be positive".into()));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("typicality slack {mu} must be positive")));
        }
        let sxy = prob.p.compose(&aux.s_given_x)?;
        let twv = aux.t.compose(&aux.w_given_t)?.compose(&prob.channel)?;
        let source_info = mutual_information(&sxy, &["S"], &["X"], &[])?;
        let channel_info = mutual_information(&twv, &["W"], &["V"], &["T"])?;
        let laws = Laws {
            nx: prob.p.size_of("X")?,
            ny: prob.p.size_of("Y")?,
            ns: aux.s_size(),
            nw: prob.channel.input_len(),
            nv: prob.channel.output_len(),
            sx: sxy.marginal(&["S", "X"])?.probs().to_vec(),
            sy: sxy.marginal(&["S", "Y"])?.probs().to_vec(),
            twv: twv.marginal(&["T", "W", "V"])?.probs().to_vec(),
            s: sxy.marginal(&["S"])?.probs().to_vec(),
            t: aux.t.probs().to_vec(),
            w_given_t: aux.w_rows(),
            channel: prob.channel.rows().map(|r| r.to_vec()).collect(),
            xy: [prob.p.permuted(&["X", "Y"])?.probs().to_vec(), prob.q.permuted(&["X", "Y"])?.probs().to_vec()],
        };
        let cfg = Self {
            n,
            mu,
            aux: aux.clone(),
            seed,
            uep: true,
            rate_margin: mu,
            rate: 0.0,
            bin_rate: 0.0,
            source_info,
            channel_info,
            prob: prob.clone(),
            laws,
        };
        Ok(cfg.with_rate_margin(mu))
    }

    /// Recomputes `(R, R')` from the case split on `I(S;X)` against
    /// `I(W;V|T)` with margin `margin`.
    pub fn with_rate_margin(mut self, margin: f64) -> Self {
        let (si, ci) = (self.source_info, self.channel_info);
        (self.rate, self.bin_rate) =
            if si < ci { (si + margin, 0.0) } else { ((ci - margin).max(0.0), si - ci + 2.0 * margin) };
        self.rate_margin = margin;
        self
    }

    pub fn without_uep(mut self) -> Self {
        self.uep = false;
        self
    }

    pub fn problem(&self) -> &HypothesisProblem {
        &self.prob
    }

    /// `floor(2^{nR})`, at least one.
    pub fn messages(&self) -> f64 {
        (self.n as f64 * self.rate).exp2().floor().max(1.0)
    }

    /// `floor(2^{nR'})`, at least one.
    pub fn bins(&self) -> f64 {
        (self.n as f64 * self.bin_rate).exp2().floor().max(1.0)
    }

    pub fn codebook_symbols(&self) -> f64 {
        self.messages() * self.bins() * self.n as f64
    }
}

/// Quantization codewords `s^n(m, l)` at `m * bins + l`, the time-sharing
/// sequence and the channel codewords `w^n(m)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codebooks {
    pub messages: usize,
    pub bins: usize,
    pub s: Vec<Seq>,
    pub t: Seq,
    pub w: Vec<Seq>,
}

pub fn build_codebooks(cfg: &SchemeConfig) -> Result<Codebooks> {
    let symbols = cfg.codebook_symbols();
    if symbols > MAX_CODEBOOK_SYMBOLS {
        return Err(Error::CodebookTooLarge(symbols));
    }
    let (messages, bins) = (cfg.messages() as usize, cfg.bins() as usize);
    let l = &cfg.laws;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s = (0..messages * bins).map(|_| iid(&mut rng, &l.s, cfg.n)).collect();
    let t = iid(&mut rng, &l.t, cfg.n);
    let rows = samplers(&l.w_given_t);
    let w = (0..messages).map(|_| through(&mut rng, &t, &rows, l.nw)).collect();
    Ok(Codebooks { messages, bins, s, t, w })
}

/// What the transmitter sent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoded {
    Codeword { message: usize, bin: usize },
    /// No codeword was typical with the source; `t^n` was sent.
    Fallback,
    /// No codeword was typical and UEP is off; `w^n(message)` was sent anyway.
    Unprotected { message: usize },
}

impl Encoded {
    pub fn input<'a>(&self, books: &'a Codebooks) -> &'a Seq {
        match *self {
            Self::Codeword { message, .. } | Self::Unprotected { message } => &books.w[message],
            Self::Fallback => &books.t,
        }
    }
}

fn typical(counts: &[u32], law: &[f64], n: usize, mu: f64) -> bool {
    let n = n as f64;
    counts.iter().zip(law).all(|(&c, &p)| (c as f64 / n - p).abs() <= mu * p + 1e-12)
}

fn pick<R: Rng>(rng: &mut R, items: &[usize]) -> Option<usize> {
    items.choose(rng).copied()
}

pub fn encode<R: Rng>(cfg: &SchemeConfig, books: &Codebooks, x: &Seq, rng: &mut R) -> Encoded {
    let l = &cfg.laws;
    let mut counts = vec![0u32; l.ns * l.nx];
    let hits: Vec<usize> = (0..books.s.len())
        .filter(|&k| {
            joint2(&books.s[k], x, &mut counts);
            typical(&counts, &l.sx, cfg.n, cfg.mu / 2.0)
        })
        .collect();
    match pick(rng, &hits) {
        Some(k) => Encoded::Codeword { message: k / books.bins, bin: k % books.bins },
        None if cfg.uep => Encoded::Fallback,
        None => Encoded::Unprotected { message: rng.gen_range(0..books.messages) },
    }
}

fn conditional_entropy_of_type(counts: &[u32], ns: usize, ny: usize) -> f64 {
    let n: u32 = counts.iter().sum();
    let n = n as f64;
    let mut h = 0.0;
    for y in 0..ny {
        let col: u32 = (0..ns).map(|s| counts[s * ny + y]).sum();
        for s in 0..ns {
            let c = counts[s * ny + y];
            if c > 0 {
                h -= c as f64 / n * (c as f64 / col as f64).log2();
            }
        }
    }
    h
}

/// The receiver's decision `0` or `1`.
pub fn decode_and_test<R: Rng>(cfg: &SchemeConfig, books: &Codebooks, v: &Seq, y: &Seq, rng: &mut R) -> u8 {
    let l = &cfg.laws;
    let tv = pair_masks(&books.t, v);
    let mut counts = vec![0u32; l.nw * l.nw * l.nv];
    let decoded: Vec<usize> = (0..books.messages)
        .filter(|&m| {
            joint3(&tv, l.nw, &books.w[m], l.nv, &mut counts);
            typical(&counts, &l.twv, cfg.n, cfg.mu)
        })
        .collect();
    let Some(m) = pick(rng, &decoded) else { return 1 };
    let mut sy = vec![0u32; l.ns * l.ny];
    let mut best = f64::INFINITY;
    let mut ties: Vec<usize> = Vec::new();
    for bin in 0..books.bins {
        joint2(&books.s[m * books.bins + bin], y, &mut sy);
        let h = conditional_entropy_of_type(&sy, l.ns, l.ny);
        if h < best - 1e-12 {
            best = h;
            ties.clear();
        }
        if h <= best + 1e-12 {
            ties.push(bin);
        }
    }
    let bin = pick(rng, &ties).expect("at least one bin");
    joint2(&books.s[m * books.bins + bin], y, &mut sy);
    if typical(&sy, &l.sy, cfg.n, cfg.mu) {
        0
    } else {
        1
    }
}

/// Wilson score interval for `k` successes out of `trials`.
pub fn wilson(k: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Debug, Serialize)]
pub struct SimResult {
    pub n: usize,
    pub mu: f64,
    pub trials: u64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// 95% Wilson intervals.
    pub alpha_ci: (f64, f64),
    pub beta_ci: (f64, f64),
    /// `-(1/n) log2 beta_hat`, absent when no type-II error was seen.
    pub exponent_hat: Option<f64>,
    /// The exponent over the Wilson interval of `beta`.
    pub exponent_ci: (f64, f64),
    /// Fraction of trials that sent `t^n`, under `H = 0` and `H = 1`.
    pub fallback_rate: (f64, f64),
}

impl SimResult {
    /// Largest distance from `beta_hat` to an end of its interval.
    pub fn beta_radius(&self) -> f64 {
        (self.beta_hat - self.beta_ci.0).max(self.beta_ci.1 - self.beta_hat)
    }
}

/// Stream of trial `index` under hypothesis `h`; stream 0 is unused so
/// that trials never share the codebook's sequence.
fn trial_rng(seed: u64, h: u8, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(1 + 2 * index + h as u64);
    rng
}

/// One end-to-end trial: `(decision, sent fallback)`.
pub fn run_trial(cfg: &SchemeConfig, books: &Codebooks, h: u8, index: u64) -> (u8, bool) {
    let l = &cfg.laws;
    let mut rng = trial_rng(cfg.seed, h, index);
    let pair = WeightedIndex::new(&l.xy[h as usize]).expect("pmf");
    let (xs, ys): (Vec<u8>, Vec<u8>) = (0..cfg.n)
        .map(|_| {
            let k = pair.sample(&mut rng);
            ((k / l.ny) as u8, (k % l.ny) as u8)
        })
        .unzip();
    let (x, y) = (Seq::new(xs, l.nx), Seq::new(ys, l.ny));
    let sent = encode(cfg, books, &x, &mut rng);
    let v = through(&mut rng, sent.input(books), &samplers(&l.channel), l.nv);
    (decode_and_test(cfg, books, &v, &y, &mut rng), sent == Encoded::Fallback)
}

/// Runs `trials` trials under each hypothesis with the codebook of `cfg.seed`.
pub fn estimate_errors(cfg: &SchemeConfig, trials: u64) -> Result<SimResult> {
    let books = build_codebooks(cfg)?;
    estimate_errors_with(cfg, &books, trials)
}

pub fn estimate_errors_with(cfg: &SchemeConfig, books: &Codebooks, trials: u64) -> Result<SimResult> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let (errors, fallbacks) = tally(cfg, books, trials);
    Ok(summarize(cfg, trials, errors, fallbacks))
}

/// Pools `trials` trials per codebook over several codebook seeds.
pub fn estimate_errors_averaged(cfg: &SchemeConfig, trials: u64, seeds: &[u64]) -> Result<SimResult> {
    if trials == 0 || seeds.is_empty() {
        return Err(Error::InvalidArgument("need at least one trial and one codebook seed".into()));
    }
    let mut errors = [0u64; 2];
    let mut fallbacks = [0u64; 2];
    for &seed in seeds {
        let c = SchemeConfig { seed, ..cfg.clone() };
        let (e, f) = tally(&c, &build_codebooks(&c)?, trials);
        for h in 0..2 {
            errors[h] += e[h];
            fallbacks[h] += f[h];
        }
    }
    Ok(summarize(cfg, trials * seeds.len() as u64, errors, fallbacks))
}

/// Error and fallback counts under `H = 0` and `H = 1`.
fn tally(cfg: &SchemeConfig, books: &Codebooks, trials: u64) -> ([u64; 2], [u64; 2]) {
    let mut errors = [0u64; 2];
    let mut fallbacks = [0u64; 2];
    for h in 0..2u8 {
        let (e, f) = (0..trials)
            .into_par_iter()
            .map(|i| {
                let (d, fb) = run_trial(cfg, books, h, i);
                ((d != h) as u64, fb as u64)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        errors[h as usize] = e;
        fallbacks[h as usize] = f;
    }
    (errors, fallbacks)
}

fn summarize(cfg: &SchemeConfig, trials: u64, errors: [u64; 2], fallbacks: [u64; 2]) -> SimResult {
    let t = trials as f64;
    let beta_hat = errors[1] as f64 / t;
    let beta_ci = wilson(errors[1], trials, Z95);
    let exponent = |b: f64| -b.log2() / cfg.n as f64;
    SimResult {
        n: cfg.n,
        mu: cfg.mu,
        trials,
        alpha_hat: errors[0] as f64 / t,
        beta_hat,
        alpha_ci: wilson(errors[0], trials, Z95),
        beta_ci,
        exponent_hat: (errors[1] > 0).then(|| exponent(beta_hat)),
        exponent_ci: (exponent(beta_ci.1), exponent(beta_ci.0)),
        fallback_rate: (fallbacks[0] as f64 / t, fallbacks[1] as f64 / t),
    }
}
