use super::channel::Channel;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 2_000_000;

#[derive(Clone, Debug)]
pub struct CapacityReport {
    /// Midpoint of the final bracket.
    pub capacity: f64,
    pub lower: f64,
    pub upper: f64,
    /// Capacity-achieving input law over the flattened input alphabet.
    pub input: Vec<f64>,
    pub iterations: usize,
}

/// Blahut-Arimoto iteration on the flattened channel, stopped once the
/// standard upper and lower bounds are within `tol` bits.
pub fn blahut_arimoto(ch: &Channel, tol: f64) -> Result<CapacityReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let nx = ch.input_len();
    let ny = ch.output_len();
    let mut p = vec![1.0 / nx as f64; nx];
    let mut d = vec![0.0; nx];
    let mut q = vec![0.0; ny];
    for it in 1..=MAX_ITERATIONS {
        q.iter_mut().for_each(|v| *v = 0.0);
        for (x, row) in ch.rows().enumerate() {
            for (qy, w) in q.iter_mut().zip(row) {
                *qy += p[x] * w;
            }
        }
        for (x, row) in ch.rows().enumerate() {
            d[x] = row
                .iter()
                .zip(&q)
                .filter(|(&w, _)| w > 0.0)
                .map(|(&w, &qy)| w * (w / qy).log2())
                .sum();
        }
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = p.iter().zip(&d).map(|(pi, di)| pi * di.exp2()).sum();
        let lower = z.log2();
        if upper - lower <= tol {
            return Ok(CapacityReport {
                capacity: 0.5 * (upper + lower),
                lower,
                upper,
                input: p,
                iterations: it,
            });
        }
        for (pi, di) in p.iter_mut().zip(&d) {
            *pi *= di.exp2() / z;
        }
    }
    Err(Error::BudgetExhausted("Blahut-Arimoto did not reach tolerance".into()))
}

/// Capacity in bits per use, accurate to `tol`.
pub fn channel_capacity(ch: &Channel, tol: f64) -> Result<f64> {
    Ok(blahut_arimoto(ch, tol)?.capacity)
}
