//! Small dense helpers shared by the solver modules.

use nalgebra::{DMatrix, DVector};

/// Singular values in nonincreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values strictly above `threshold`.
pub fn count_above(m: &DMatrix<f64>, threshold: f64) -> usize {
    singular_values(m).into_iter().filter(|&s| s > threshold).count()
}

/// 2-norm condition number; infinite for singular or empty input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Upward shift matrix: ones on the superdiagonal.
pub fn shift_up(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// Companion form `J − p e₁'`: first column `−p`, ones on the superdiagonal.
pub fn companion(p: &[f64]) -> DMatrix<f64> {
    let n = p.len();
    let mut m = shift_up(n);
    for (i, &pi) in p.iter().enumerate() {
        m[(i, 0)] = -pi;
    }
    m
}

/// Lower-triangular Toeplitz matrix with the given first column.
pub fn lower_toeplitz(first_col: &[f64]) -> DMatrix<f64> {
    let n = first_col.len();
    DMatrix::from_fn(n, n, |i, j| if i >= j { first_col[i - j] } else { 0.0 })
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
