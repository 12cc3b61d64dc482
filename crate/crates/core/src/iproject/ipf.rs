use super::Block;

/// Largest absolute marginal mismatch over all blocks.
pub(crate) fn residual(pi: &[f64], blocks: &[Block]) -> f64 {
    let mut worst: f64 = 0.0;
    for b in blocks {
        let mut m = vec![0.0; b.target.len()];
        for (x, &p) in pi.iter().enumerate() {
            m[b.map[x]] += p;
        }
        for (a, t) in m.iter().zip(&b.target) {
            worst = worst.max((a - t).abs());
        }
    }
    worst
}

/// Iterative proportional fitting in place. Returns sweeps used and the
/// final residual. Stops once the residual is at rounding level.
pub(crate) fn run(pi: &mut [f64], blocks: &[Block], max_sweeps: usize) -> (usize, f64) {
    if blocks.is_empty() {
        return (0, 0.0);
    }
    let mut res = residual(pi, blocks);
    let mut sweeps = 0;
    let mut stalled = 0;
    while sweeps < max_sweeps && res > 1e-14 {
        for b in blocks {
            let mut m = vec![0.0; b.target.len()];
            for (x, &p) in pi.iter().enumerate() {
                m[b.map[x]] += p;
            }
            let scale: Vec<f64> = m
                .iter()
                .zip(&b.target)
                .map(|(&a, &t)| if a > 0.0 { t / a } else { 0.0 })
                .collect();
            for (x, p) in pi.iter_mut().enumerate() {
                *p *= scale[b.map[x]];
            }
        }
        sweeps += 1;
        let next = residual(pi, blocks);
        // Rounding floor reached: further sweeps cannot help.
        if next >= res * (1.0 - 1e-12) && next < 1e-12 {
            stalled += 1;
            if stalled > 3 {
                res = next;
                break;
            }
        } else {
            stalled = 0;
        }
        res = next;
    }
    (sweeps, res)
}
