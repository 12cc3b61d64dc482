//! Symbol sequences with per-letter indicator bitsets, so that joint types
//! cost a few popcounts per 64 symbols.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Seq {
    symbols: Vec<u8>,
    /// Letter-major indicator words: `masks[a * words + k]`.
    masks: Vec<u64>,
    letters: usize,
}

pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

impl Seq {
    pub fn new(symbols: Vec<u8>, letters: usize) -> Self {
        let words = words_for(symbols.len());
        let mut masks = vec![0u64; letters * words];
        for (k, &s) in symbols.iter().enumerate() {
            masks[s as usize * words + k / 64] |= 1u64 << (k % 64);
        }
        Self { symbols, masks, letters }
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn letters(&self) -> usize {
        self.letters
    }

    fn words(&self) -> usize {
        words_for(self.symbols.len())
    }

    pub(crate) fn mask(&self, letter: usize) -> &[u64] {
        let w = self.words();
        &self.masks[letter * w..(letter + 1) * w]
    }
}

/// Draws `n` i.i.d. symbols from `weights`.
pub(crate) fn iid<R: Rng>(rng: &mut R, weights: &[f64], n: usize) -> Seq {
    let dist = WeightedIndex::new(weights).expect("a pmf has positive mass");
    Seq::new((0..n).map(|_| dist.sample(rng) as u8).collect(), weights.len())
}

/// Passes `input` through a memoryless channel given by `rows`.
pub(crate) fn through<R: Rng>(rng: &mut R, input: &Seq, rows: &[WeightedIndex<f64>], letters: usize) -> Seq {
    Seq::new(input.symbols().iter().map(|&a| rows[a as usize].sample(rng) as u8).collect(), letters)
}

pub(crate) fn samplers(rows: &[Vec<f64>]) -> Vec<WeightedIndex<f64>> {
    rows.iter().map(|r| WeightedIndex::new(r).expect("stochastic row")).collect()
}

/// Joint counts of `(a, b)` into `out[i * |b| + j]`.
pub(crate) fn joint2(a: &Seq, b: &Seq, out: &mut [u32]) {
    let kb = b.letters();
    for i in 0..a.letters() {
        let ma = a.mask(i);
        for j in 0..kb {
            let mb = b.mask(j);
            out[i * kb + j] = ma.iter().zip(mb).map(|(x, y)| (x & y).count_ones()).sum();
        }
    }
}

/// Joint counts of `(a, b, c)` given precomputed `a & c` masks (`ac[i * |c| + l]`).
pub(crate) fn joint3(ac: &[Vec<u64>], la: usize, b: &Seq, lc: usize, out: &mut [u32]) {
    let kb = b.letters();
    for i in 0..la {
        for j in 0..kb {
            let mb = b.mask(j);
            for l in 0..lc {
                let m = &ac[i * lc + l];
                out[(i * kb + j) * lc + l] = m.iter().zip(mb).map(|(x, y)| (x & y).count_ones()).sum();
            }
        }
    }
}

/// Masks `a_i & c_l` in `(i, l)` row-major order.
pub(crate) fn pair_masks(a: &Seq, c: &Seq) -> Vec<Vec<u64>> {
    let mut out = Vec::with_capacity(a.letters() * c.letters());
    for i in 0..a.letters() {
        for l in 0..c.letters() {
            out.push(a.mask(i).iter().zip(c.mask(l)).map(|(x, y)| x & y).collect());
        }
    }
    out
}
