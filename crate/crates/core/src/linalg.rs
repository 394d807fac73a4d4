//! Dense complex linear algebra helpers over nalgebra.

use crate::C64;
use nalgebra::{DMatrix, DVector};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Inverse, or `None` when the matrix is numerically singular.
pub fn inverse(m: &CMat) -> Option<CMat> {
    let n = m.nrows();
    if n != m.ncols() {
        return None;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 1e-12 * smax.max(1.0)) {
        return None;
    }
    m.clone().try_inverse()
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Least-squares solution of `a x = b` together with the max-abs residual `|a x - b|`.
pub fn lstsq(a: &CMat, b: &CVec) -> (CVec, f64) {
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(b, 1e-13)
        .unwrap_or_else(|_| CVec::zeros(a.ncols()));
    let r = a * &x - b;
    let res = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    (x, res)
}
