//! Dense helpers on top of nalgebra. Large Gram products go straight to
//! `matrixmultiply` so that no transposed copy of a wide feature matrix is made.

use nalgebra::{Cholesky, DMatrix, Dyn};

/// Smallest acceptable squared ratio of Cholesky pivots before a system is
/// treated as numerically singular.
const PIVOT_RATIO_FLOOR: f64 = 1e-15;

/// `X Xᵀ` for a column-major `n × d` matrix.
pub(crate) fn gram_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let mut out = DMatrix::<f64>::zeros(n, n);
    if n == 0 || d == 0 {
        return out;
    }
    // SAFETY: the strides describe `x` (column-major n×d), its transpose, and
    // the column-major n×n output buffer, all of which are fully allocated.
    unsafe {
        matrixmultiply::dgemm(
            n,
            d,
            n,
            1.0,
            x.as_ptr(),
            1,
            n as isize,
            x.as_ptr(),
            n as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            1,
            n as isize,
        );
    }
    symmetrize(&mut out);
    out
}

/// `Xᵀ X` for a column-major `n × d` matrix.
pub(crate) fn gram_cols(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let mut out = DMatrix::<f64>::zeros(d, d);
    if n == 0 || d == 0 {
        return out;
    }
    // SAFETY: see `gram_rows`.
    unsafe {
        matrixmultiply::dgemm(
            d,
            n,
            d,
            1.0,
            x.as_ptr(),
            n as isize,
            1,
            x.as_ptr(),
            1,
            n as isize,
            0.0,
            out.as_mut_ptr(),
            1,
            d as isize,
        );
    }
    symmetrize(&mut out);
    out
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Cholesky factorization that also rejects numerically singular matrices.
pub(crate) fn cholesky(a: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(a)?;
    let l = chol.l_dirty();
    let diag = l.diagonal();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || (min / max).powi(2) < PIVOT_RATIO_FLOOR {
        return None;
    }
    Some(chol)
}
