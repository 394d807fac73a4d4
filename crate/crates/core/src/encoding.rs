//! JSON encodings of complex data as `[re, im]` pairs.

use crate::linalg::CMat;
use crate::C64;

pub type Pair = [f64; 2];

pub fn to_pair(z: C64) -> Pair {
    [z.re, z.im]
}

pub fn from_pair(p: &Pair) -> C64 {
    C64::new(p[0], p[1])
}

pub fn vec_to_pairs(v: &[C64]) -> Vec<Pair> {
    v.iter().map(|z| to_pair(*z)).collect()
}

pub fn pairs_to_vec(v: &[Pair]) -> Vec<C64> {
    v.iter().map(from_pair).collect()
}

pub fn mat_to_pairs(m: &CMat) -> Vec<Vec<Pair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| to_pair(m[(i, j)])).collect())
        .collect()
}

/// Rows of pairs to a matrix; `None` if the rows are ragged or the shape is not `rows x cols`.
pub fn pairs_to_mat(rows: &[Vec<Pair>], nrows: usize, ncols: usize) -> Option<CMat> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(CMat::from_fn(nrows, ncols, |i, j| from_pair(&rows[i][j])))
}
