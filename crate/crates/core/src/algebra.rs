//! Finite-dimensional complex *-algebras, their elements, and twisted-trace states.

use crate::encoding::{from_pair, pairs_to_mat, pairs_to_vec, Pair};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, CMat};
use crate::report::Report;
use crate::tolerance;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// An algebra element, stored by its coordinates in the owning algebra's basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Elem(pub Vec<C64>);

impl Elem {
    pub fn zeros(dim: usize) -> Self {
        Elem(vec![C64::new(0.0, 0.0); dim])
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut e = Self::zeros(dim);
        e.0[i] = C64::new(1.0, 0.0);
        e
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[C64] {
        &self.0
    }

    pub fn scale(&self, s: C64) -> Elem {
        Elem(self.0.iter().map(|z| z * s).collect())
    }

    /// Adds `s * other` in place.
    pub fn axpy(&mut self, s: C64, other: &Elem) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max coordinatewise deviation.
    pub fn dist(&self, other: &Elem) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Elem, tol: f64) -> bool {
        self.dim() == other.dim() && self.dist(other) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr<&Elem> for &Elem {
            type Output = Elem;
            fn $f(self, rhs: &Elem) -> Elem {
                assert_eq!(self.dim(), rhs.dim(), "element dimension mismatch");
                Elem(self.0.iter().zip(&rhs.0).map(|(a, b)| a $op b).collect())
            }
        }
        impl $tr<Elem> for Elem {
            type Output = Elem;
            fn $f(self, rhs: Elem) -> Elem {
                &self $op &rhs
            }
        }
        impl $tr<&Elem> for Elem {
            type Output = Elem;
            fn $f(self, rhs: &Elem) -> Elem {
                &self $op rhs
            }
        }
    };
}
binop!(Add, add, +);
binop!(Sub, sub, -);

impl AddAssign<&Elem> for Elem {
    fn add_assign(&mut self, rhs: &Elem) {
        self.axpy(C64::new(1.0, 0.0), rhs);
    }
}

impl SubAssign<&Elem> for Elem {
    fn sub_assign(&mut self, rhs: &Elem) {
        self.axpy(C64::new(-1.0, 0.0), rhs);
    }
}

impl Neg for &Elem {
    type Output = Elem;
    fn neg(self) -> Elem {
        Elem(self.0.iter().map(|z| -z).collect())
    }
}

impl Neg for Elem {
    type Output = Elem;
    fn neg(self) -> Elem {
        -&self
    }
}

impl Mul<C64> for &Elem {
    type Output = Elem;
    fn mul(self, s: C64) -> Elem {
        self.scale(s)
    }
}

impl Mul<C64> for Elem {
    type Output = Elem;
    fn mul(self, s: C64) -> Elem {
        self.scale(s)
    }
}

/// A finite-dimensional complex *-algebra.
///
/// `structure[(i * dim + j) * dim + k]` is the coefficient of basis `k` in `basis_i * basis_j`.
/// The star is coordinatewise conjugation followed by `star_matrix`.
#[derive(Clone, Debug)]
pub struct Algebra {
    dim: usize,
    labels: Vec<String>,
    structure: Vec<C64>,
    // nonzero structure constants, so products cost O(nnz) instead of O(dim^3)
    terms: Vec<(usize, usize, usize, C64)>,
    unit: Elem,
    star_matrix: CMat,
}

impl Algebra {
    /// Builds an algebra and checks associativity, the unit and the star axioms.
    pub fn new(
        labels: Vec<String>,
        structure: Vec<C64>,
        unit: Vec<C64>,
        star_matrix: CMat,
    ) -> Result<Self> {
        let dim = labels.len();
        if dim == 0 {
            return Err(Error::Invalid("algebra dimension must be positive".into()));
        }
        check_dim(dim * dim * dim, structure.len())?;
        check_dim(dim, unit.len())?;
        check_dim(dim, star_matrix.nrows())?;
        check_dim(dim, star_matrix.ncols())?;
        let terms = structure
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(idx, z)| (idx / (dim * dim), (idx / dim) % dim, idx % dim, *z))
            .collect();
        let alg = Algebra {
            dim,
            labels,
            structure,
            terms,
            unit: Elem(unit),
            star_matrix,
        };
        let rep = alg.axioms_report();
        if let Some(bad) = rep.failures().next() {
            return Err(Error::Invalid(format!(
                "algebra axiom `{}` fails with residual {:.3e}",
                bad.name, bad.residual
            )));
        }
        Ok(alg)
    }

    /// The matrix algebra M_n with basis E_ij in row-major order and star the conjugate transpose.
    pub fn matrix(n: usize) -> Self {
        let dim = n * n;
        let mut structure = vec![C64::new(0.0, 0.0); dim * dim * dim];
        // E_ij E_kl = delta_jk E_il
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let a = i * n + j;
                    let b = j * n + l;
                    let r = i * n + l;
                    structure[(a * dim + b) * dim + r] = C64::new(1.0, 0.0);
                }
            }
        }
        let mut unit = vec![C64::new(0.0, 0.0); dim];
        for i in 0..n {
            unit[i * n + i] = C64::new(1.0, 0.0);
        }
        let mut star = CMat::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                star[(j * n + i, i * n + j)] = C64::new(1.0, 0.0);
            }
        }
        let labels = (0..n)
            .flat_map(|i| (0..n).map(move |j| format!("E{}{}", i + 1, j + 1)))
            .collect();
        Algebra::new(labels, structure, unit, star).expect("matrix algebra is well formed")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> C64 {
        self.structure[(i * self.dim + j) * self.dim + k]
    }

    pub fn star_matrix(&self) -> &CMat {
        &self.star_matrix
    }

    pub fn zero(&self) -> Elem {
        Elem::zeros(self.dim)
    }

    pub fn one(&self) -> Elem {
        self.unit.clone()
    }

    pub fn basis(&self, i: usize) -> Elem {
        Elem::basis(self.dim, i)
    }

    pub fn scalar(&self, z: C64) -> Elem {
        self.unit.scale(z)
    }

    pub fn from_coords(&self, coords: Vec<C64>) -> Result<Elem> {
        check_dim(self.dim, coords.len())?;
        Ok(Elem(coords))
    }

    pub fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        debug_assert_eq!(a.dim(), self.dim);
        debug_assert_eq!(b.dim(), self.dim);
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for &(i, j, k, c) in &self.terms {
            out[k] += a.0[i] * b.0[j] * c;
        }
        Elem(out)
    }

    /// Product of a sequence of elements, left to right.
    pub fn prod(&self, factors: &[&Elem]) -> Elem {
        factors.iter().fold(self.one(), |acc, f| self.mul(&acc, f))
    }

    /// Checked product for elements of unknown provenance.
    pub fn try_mul(&self, a: &Elem, b: &Elem) -> Result<Elem> {
        check_dim(self.dim, a.dim())?;
        check_dim(self.dim, b.dim())?;
        Ok(self.mul(a, b))
    }

    pub fn star(&self, a: &Elem) -> Elem {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for j in 0..self.dim {
            let z = a.0[j].conj();
            if z.norm() == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.star_matrix[(i, j)] * z;
            }
        }
        Elem(out)
    }

    pub fn comm(&self, a: &Elem, b: &Elem) -> Elem {
        self.mul(a, b) - self.mul(b, a)
    }

    pub fn anticomm(&self, a: &Elem, b: &Elem) -> Elem {
        self.mul(a, b) + self.mul(b, a)
    }

    /// Matrix of left multiplication by `a` on coordinates.
    pub fn left_mul_matrix(&self, a: &Elem) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for &(i, j, k, c) in &self.terms {
            m[(k, j)] += a.0[i] * c;
        }
        m
    }

    pub fn associativity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            let bi = self.basis(i);
            for j in 0..self.dim {
                let bij = self.mul(&bi, &self.basis(j));
                for k in 0..self.dim {
                    let bk = self.basis(k);
                    let lhs = self.mul(&bij, &bk);
                    let rhs = self.mul(&bi, &self.mul(&self.basis(j), &bk));
                    worst = worst.max(lhs.dist(&rhs));
                }
            }
        }
        worst
    }

    pub fn unit_residual(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                let b = self.basis(i);
                self.mul(&self.unit, &b)
                    .dist(&b)
                    .max(self.mul(&b, &self.unit).dist(&b))
            })
            .fold(0.0, f64::max)
    }

    /// Residuals of star(star(a)) = a and star(ab) = star(b) star(a) on basis elements.
    pub fn star_residuals(&self) -> (f64, f64) {
        let mut inv: f64 = 0.0;
        let mut anti: f64 = 0.0;
        for i in 0..self.dim {
            let bi = self.basis(i);
            inv = inv.max(self.star(&self.star(&bi)).dist(&bi));
            for j in 0..self.dim {
                let bj = self.basis(j);
                let lhs = self.star(&self.mul(&bi, &bj));
                let rhs = self.mul(&self.star(&bj), &self.star(&bi));
                anti = anti.max(lhs.dist(&rhs));
            }
        }
        (inv, anti)
    }

    pub fn axioms_report(&self) -> Report {
        let mut r = Report::new();
        r.at_most(
            "associativity",
            self.associativity_residual(),
            tolerance::IDENTITY,
        );
        r.at_most("unit", self.unit_residual(), tolerance::IDENTITY);
        let (inv, anti) = self.star_residuals();
        r.at_most("star_involution", inv, tolerance::IDENTITY);
        r.at_most("star_antihomomorphism", anti, tolerance::IDENTITY);
        r
    }

    pub fn from_spec(spec: &AlgebraSpec) -> Result<Self> {
        let dim = spec.dim;
        check_dim(dim, spec.labels.len())?;
        check_dim(dim, spec.structure_constants.len())?;
        let mut structure = Vec::with_capacity(dim * dim * dim);
        for row in &spec.structure_constants {
            check_dim(dim, row.len())?;
            for cell in row {
                check_dim(dim, cell.len())?;
                structure.extend(cell.iter().map(from_pair));
            }
        }
        let star = pairs_to_mat(&spec.star_matrix, dim, dim)
            .ok_or_else(|| Error::Invalid("star_matrix must be dim x dim".into()))?;
        Algebra::new(
            spec.labels.clone(),
            structure,
            pairs_to_vec(&spec.unit),
            star,
        )
    }

    pub fn to_spec(&self) -> AlgebraSpec {
        let d = self.dim;
        AlgebraSpec {
            dim: d,
            labels: self.labels.clone(),
            structure_constants: (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            (0..d)
                                .map(|k| {
                                    let z = self.structure_constant(i, j, k);
                                    [z.re, z.im]
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            unit: crate::encoding::vec_to_pairs(&self.unit.0),
            star_matrix: crate::encoding::mat_to_pairs(&self.star_matrix),
        }
    }
}

/// JSON description of an algebra. Complex numbers are `[re, im]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgebraSpec {
    pub dim: usize,
    pub labels: Vec<String>,
    /// `structure_constants[i][j][k]`: coefficient of basis k in basis_i * basis_j.
    pub structure_constants: Vec<Vec<Vec<Pair>>>,
    pub unit: Vec<Pair>,
    pub star_matrix: Vec<Vec<Pair>>,
}

/// Coordinates of an n x n matrix in the row-major E_ij basis of [`Algebra::matrix`].
pub fn matrix_to_elem(m: &CMat) -> Elem {
    let n = m.nrows();
    Elem((0..n * n).map(|k| m[(k / n, k % n)]).collect())
}

/// Inverse of [`matrix_to_elem`].
pub fn elem_to_matrix(e: &Elem, n: usize) -> CMat {
    CMat::from_fn(n, n, |i, j| e.0[i * n + j])
}

/// A linear functional phi(a) = sum_i phi_i a_i together with a twist automorphism.
#[derive(Clone, Debug)]
pub struct StateFunctional {
    phi: Vec<C64>,
    twist: CMat,
    twist_inv: CMat,
}

impl StateFunctional {
    pub fn new(phi: Vec<C64>, twist: CMat) -> Result<Self> {
        check_dim(phi.len(), twist.nrows())?;
        check_dim(phi.len(), twist.ncols())?;
        let twist_inv = linalg::inverse(&twist)
            .ok_or_else(|| Error::Invalid("twist matrix is not invertible".into()))?;
        Ok(StateFunctional {
            phi,
            twist,
            twist_inv,
        })
    }

    /// A state with trivial twist.
    pub fn untwisted(phi: Vec<C64>) -> Self {
        let n = phi.len();
        StateFunctional {
            phi,
            twist: linalg::identity(n),
            twist_inv: linalg::identity(n),
        }
    }

    /// phi = Tr(a N) / n on M_n, i.e. normalized trace weighted by the matrix `weight`.
    pub fn weighted_trace(weight: &CMat) -> Self {
        let n = weight.nrows();
        let phi = (0..n * n).map(|k| weight[(k % n, k / n)]).collect();
        Self::untwisted(phi)
    }

    /// The normalized trace Tr / n on M_n.
    pub fn normalized_trace(n: usize) -> Self {
        Self::weighted_trace(&(linalg::identity(n) * C64::new(1.0 / n as f64, 0.0)))
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.phi
    }

    pub fn twist_matrix(&self) -> &CMat {
        &self.twist
    }

    pub fn eval(&self, a: &Elem) -> C64 {
        self.phi.iter().zip(&a.0).map(|(p, x)| p * x).sum()
    }

    pub fn twist(&self, a: &Elem) -> Elem {
        Elem(
            (&self.twist * crate::linalg::CVec::from_column_slice(&a.0))
                .iter()
                .copied()
                .collect(),
        )
    }

    pub fn twist_inv(&self, a: &Elem) -> Elem {
        Elem(
            (&self.twist_inv * crate::linalg::CVec::from_column_slice(&a.0))
                .iter()
                .copied()
                .collect(),
        )
    }

    pub fn is_identity_twist(&self) -> bool {
        linalg::max_abs(&(&self.twist - linalg::identity(self.twist.nrows()))) == 0.0
    }

    /// P[i][j] = phi(basis_i basis_j).
    pub fn pairing_matrix(&self, alg: &Algebra) -> CMat {
        let d = alg.dim();
        CMat::from_fn(d, d, |i, j| {
            self.eval(&alg.mul(&alg.basis(i), &alg.basis(j)))
        })
    }
}

/// The five state checks: hermitian, twisted trace, twist invariance, twist multiplicativity
/// and nondegeneracy (smallest singular value of the pairing matrix relative to the largest).
pub fn state_checks(alg: &Algebra, st: &StateFunctional) -> Report {
    let mut r = Report::new();
    let d = alg.dim();
    if st.coeffs().len() != d {
        r.at_most("dimension", f64::INFINITY, 0.0);
        return r;
    }
    let basis: Vec<Elem> = (0..d).map(|i| alg.basis(i)).collect();
    let mut herm: f64 = 0.0;
    let mut twisted: f64 = 0.0;
    let mut inv: f64 = 0.0;
    let mut auto: f64 = 0.0;
    for a in &basis {
        herm = herm.max((st.eval(&alg.star(a)) - st.eval(a).conj()).norm());
        inv = inv.max((st.eval(&st.twist(a)) - st.eval(a)).norm());
        for b in &basis {
            let lhs = st.eval(&alg.mul(a, b));
            let rhs = st.eval(&alg.mul(&st.twist(b), a));
            twisted = twisted.max((lhs - rhs).norm());
            let sab = st.twist(&alg.mul(a, b));
            let sasb = alg.mul(&st.twist(a), &st.twist(b));
            auto = auto.max(sab.dist(&sasb));
        }
    }
    auto = auto.max(st.twist(&alg.one()).dist(&alg.one()));
    r.at_most("hermitian", herm, tolerance::IDENTITY);
    r.at_most("twisted_trace", twisted, tolerance::IDENTITY);
    r.at_most("twist_invariance", inv, tolerance::IDENTITY);
    r.at_most("twist_automorphism", auto, tolerance::IDENTITY);
    let sv = linalg::singular_values(&st.pairing_matrix(alg));
    let ratio = if sv[0] > 0.0 {
        sv[sv.len() - 1] / sv[0]
    } else {
        0.0
    };
    r.at_least("nondegenerate", ratio, tolerance::IDENTITY);
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: [[f64; 2]; 2]) -> CMat {
        CMat::from_fn(2, 2, |i, j| C64::new(rows[i][j], 0.0))
    }

    #[test]
    fn matrix_units_multiply() {
        let a = Algebra::matrix(2);
        // E12 E21 = E11
        let p = a.mul(&a.basis(1), &a.basis(2));
        assert!(p.approx_eq(&a.basis(0), 0.0));
        assert_eq!(a.labels()[1], "E12");
    }

    #[test]
    fn commutator_matches_matrix_arithmetic() {
        let a = Algebra::matrix(2);
        let e12 = m([[0.0, 1.0], [0.0, 0.0]]);
        let e21 = m([[0.0, 0.0], [1.0, 0.0]]);
        let want = &e12 * &e21 - &e21 * &e12;
        let got = a.comm(&a.basis(1), &a.basis(2));
        assert!(got.approx_eq(&matrix_to_elem(&want), 1e-15));
        assert!(got.approx_eq(&(a.basis(0) - a.basis(3)), 0.0));
    }

    #[test]
    fn star_is_conjugate_transpose() {
        let a = Algebra::matrix(2);
        assert!(a.star(&a.basis(1)).approx_eq(&a.basis(2), 0.0));
        let x = Elem(vec![
            C64::new(1.0, 2.0),
            C64::new(3.0, -1.0),
            C64::new(0.5, 0.25),
            C64::new(-2.0, 1.0),
        ]);
        let want = elem_to_matrix(&x, 2).adjoint();
        assert!(a.star(&x).approx_eq(&matrix_to_elem(&want), 0.0));
    }

    #[test]
    fn matrix_algebra_axioms() {
        for n in 1..=3 {
            assert!(Algebra::matrix(n).axioms_report().all_pass());
        }
    }

    #[test]
    fn trace_state_passes() {
        let a = Algebra::matrix(2);
        let st = StateFunctional::normalized_trace(2);
        let rep = state_checks(&a, &st);
        assert!(rep.all_pass(), "{rep}");
    }

    #[test]
    fn weighted_trace_breaks_untwisted_trace_property() {
        let a = Algebra::matrix(2);
        let st = StateFunctional::weighted_trace(&m([[0.7, 0.0], [0.0, 0.3]]));
        let rep = state_checks(&a, &st);
        assert!(!rep.get("twisted_trace").unwrap().pass);
        // phi(E12 E21) - phi(E21 E12) = 0.7 - 0.3
        let lhs = st.eval(&a.mul(&a.basis(1), &a.basis(2)));
        let rhs = st.eval(&a.mul(&a.basis(2), &a.basis(1)));
        assert!(((lhs - rhs).re - 0.4).abs() < 1e-15);
    }

    #[test]
    fn weighted_trace_with_modular_twist_passes() {
        // phi = Tr(.N) is a twisted trace for the twist a -> N^{-1} a N
        let a = Algebra::matrix(2);
        let n = m([[0.7, 0.0], [0.0, 0.3]]);
        let ninv = n.clone().try_inverse().unwrap();
        let twist = CMat::from_fn(4, 4, |i, j| {
            let e = elem_to_matrix(&a.basis(j), 2);
            matrix_to_elem(&(&ninv * e * &n)).0[i]
        });
        let phi = StateFunctional::weighted_trace(&n).coeffs().to_vec();
        let st = StateFunctional::new(phi, twist).unwrap();
        let rep = state_checks(&a, &st);
        assert!(rep.all_pass(), "{rep}");
    }

    #[test]
    fn degenerate_state_flagged() {
        let a = Algebra::matrix(2);
        let st = StateFunctional::weighted_trace(&m([[1.0, 0.0], [0.0, 0.0]]));
        assert!(!state_checks(&a, &st).get("nondegenerate").unwrap().pass);
    }

    #[test]
    fn spec_round_trip() {
        let a = Algebra::matrix(2);
        let json = serde_json::to_string(&a.to_spec()).unwrap();
        let spec: AlgebraSpec = serde_json::from_str(&json).unwrap();
        let b = Algebra::from_spec(&spec).unwrap();
        let x = a.basis(1) + a.basis(3);
        assert_eq!(a.mul(&x, &x), b.mul(&x, &x));
    }

    #[test]
    fn nonassociative_spec_rejected() {
        let mut spec = Algebra::matrix(2).to_spec();
        spec.structure_constants[1][2][0] = [2.0, 0.0];
        assert!(matches!(Algebra::from_spec(&spec), Err(Error::Invalid(_))));
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let a = Algebra::matrix(2);
        let r = a.try_mul(&Elem::zeros(3), &a.one());
        assert!(matches!(
            r,
            Err(Error::Dimension {
                expected: 4,
                got: 3
            })
        ));
    }
}
