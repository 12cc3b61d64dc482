use nalgebra::{DMatrix, DVector};

/// Reduced row echelon form of `[a | b]` with partial pivoting.
pub(crate) struct Echelon {
    /// Pivot column of each kept row.
    pub pivots: Vec<usize>,
    /// Reduced rows (length `ncols`), one per pivot.
    pub rows: Vec<Vec<f64>>,
    /// Right-hand side after reduction, one per pivot.
    pub rhs: Vec<f64>,
    /// Largest |rhs| among rows that reduced to zero; large means inconsistent.
    pub inconsistency: f64,
}

impl Echelon {
    pub fn free_columns(&self, ncols: usize) -> Vec<usize> {
        (0..ncols).filter(|c| !self.pivots.contains(c)).collect()
    }
}

pub(crate) fn echelon(a: &[Vec<f64>], b: &[f64], ncols: usize, tol: f64) -> Echelon {
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    let nrows = m.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        let (best, val) = (r..nrows)
            .map(|i| (i, m[i][c].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol {
            continue;
        }
        m.swap(r, best);
        rhs.swap(r, best);
        let p = m[r][c];
        for v in m[r].iter_mut() {
            *v /= p;
        }
        rhs[r] /= p;
        let pivot_row = m[r].clone();
        let pivot_rhs = rhs[r];
        for i in 0..nrows {
            if i != r {
                let f = m[i][c];
                if f != 0.0 {
                    for (v, pv) in m[i].iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                    rhs[i] -= f * pivot_rhs;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let inconsistency = rhs[r..].iter().map(|v| v.abs()).fold(0.0, f64::max);
    m.truncate(r);
    rhs.truncate(r);
    Echelon { pivots, rows: m, rhs, inconsistency }
}

/// Orthonormal basis (as columns) of the null space of the `a` rows.
pub(crate) fn null_space(a: &[Vec<f64>], ncols: usize) -> DMatrix<f64> {
    let zeros = vec![0.0; a.len()];
    let e = echelon(a, &zeros, ncols, 1e-10);
    let free = e.free_columns(ncols);
    if free.is_empty() {
        return DMatrix::zeros(ncols, 0);
    }
    let mut basis = DMatrix::zeros(ncols, free.len());
    for (j, &f) in free.iter().enumerate() {
        basis[(f, j)] = 1.0;
        for (row, &p) in e.rows.iter().zip(&e.pivots) {
            basis[(p, j)] = -row[f];
        }
    }
    basis.qr().q()
}

/// Solves `h x = g` for symmetric positive (semi)definite `h`, adding a
/// growing ridge when the Cholesky factorization fails.
pub(crate) fn solve_spd(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = h.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..30 {
        let mut m = h.clone();
        if ridge > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += ridge;
            }
        }
        if let Some(ch) = m.cholesky() {
            return Some(ch.solve(g));
        }
        ridge = if ridge == 0.0 { scale * 1e-14 } else { ridge * 100.0 };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_is_orthogonal_to_rows() {
        let a = vec![vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0], vec![1.0, 1.0, 1.0, 1.0]];
        let n = null_space(&a, 4);
        assert_eq!(n.ncols(), 2);
        for row in &a {
            for j in 0..n.ncols() {
                let dot: f64 = row.iter().enumerate().map(|(i, v)| v * n[(i, j)]).sum();
                assert!(dot.abs() < 1e-12);
            }
        }
        let gram = n.transpose() * &n;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn echelon_detects_inconsistency() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(echelon(&a, &[1.0, 0.5], 2, 1e-12).inconsistency > 0.4);
        assert!(echelon(&a, &[1.0, 1.0], 2, 1e-12).inconsistency < 1e-15);
    }
}
