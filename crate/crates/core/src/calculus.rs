//! First-order differential calculi with a central basis of one-forms.

use crate::algebra::{Algebra, AlgebraSpec, Elem};
use crate::encoding::{pairs_to_mat, Pair};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::report::Report;
use crate::tolerance;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// One-form sum_a xi_a e^a (coefficients on the left; the basis is central).
#[derive(Clone, Debug, PartialEq)]
pub struct OneForm(pub Vec<Elem>);

/// Left vector field sum_a f_a X^a over the dual basis f_a.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField(pub Vec<Elem>);

/// Which pair of bases a [`Tensor2`] is expanded in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TensorKind {
    /// sum T_ab e^a (x) e^b
    FormForm,
    /// sum T_ab f_a (x) e^b
    FieldForm,
    /// sum T_ab e^a (x) f_b
    FormField,
    /// sum T_ab f_a (x) f_b
    FieldField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor2 {
    pub kind: TensorKind,
    pub comps: Vec<Vec<Elem>>,
}

impl Tensor2 {
    pub fn zeros(kind: TensorKind, m: usize, dim: usize) -> Self {
        Tensor2 {
            kind,
            comps: vec![vec![Elem::zeros(dim); m]; m],
        }
    }

    pub fn get(&self, a: usize, b: usize) -> &Elem {
        &self.comps[a][b]
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .map(Elem::max_abs)
            .fold(0.0, f64::max)
    }

    /// Max componentwise distance; `None` when the kinds differ.
    pub fn dist(&self, other: &Tensor2) -> Option<f64> {
        if self.kind != other.kind {
            return None;
        }
        Some(
            self.comps
                .iter()
                .flatten()
                .zip(other.comps.iter().flatten())
                .map(|(a, b)| a.dist(b))
                .fold(0.0, f64::max),
        )
    }
}

macro_rules! component_list {
    ($t:ident) => {
        impl $t {
            pub fn zeros(m: usize, dim: usize) -> Self {
                $t(vec![Elem::zeros(dim); m])
            }
            pub fn len(&self) -> usize {
                self.0.len()
            }
            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }
            pub fn max_abs(&self) -> f64 {
                self.0.iter().map(Elem::max_abs).fold(0.0, f64::max)
            }
            pub fn dist(&self, other: &$t) -> f64 {
                self.0
                    .iter()
                    .zip(&other.0)
                    .map(|(a, b)| a.dist(b))
                    .fold(0.0, f64::max)
            }
            pub fn is_finite(&self) -> bool {
                self.0.iter().all(Elem::is_finite)
            }
            pub fn scale(&self, s: C64) -> $t {
                $t(self.0.iter().map(|e| e.scale(s)).collect())
            }
            pub fn add(&self, other: &$t) -> $t {
                $t(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
            }
            pub fn sub(&self, other: &$t) -> $t {
                $t(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
            }
        }
    };
}
component_list!(OneForm);
component_list!(VectorField);

/// Grassmann exterior square on the basis: s^a ^ s^b = -s^b ^ s^a, with
/// d(e^i) = sum_{j<k} ds[i][j][k] e^j ^ e^k (stored antisymmetrically in j, k).
#[derive(Clone, Debug)]
pub struct Grassmann {
    pub ds: Vec<Vec<Vec<C64>>>,
}

/// A first-order calculus: partial derivatives as matrices on algebra coordinates and the
/// star on the one-form basis, (e^a)* = sum_b J[a][b] e^b.
#[derive(Clone, Debug)]
pub struct Calculus {
    alg: Arc<Algebra>,
    labels: Vec<String>,
    partials: Vec<CMat>,
    form_star: CMat,
    exterior: Option<Grassmann>,
}

impl Calculus {
    /// Builds the calculus and rejects partials that fail the Leibniz rule or the unit law.
    pub fn new(
        alg: Arc<Algebra>,
        labels: Vec<String>,
        partials: Vec<CMat>,
        form_star: CMat,
    ) -> Result<Self> {
        let m = labels.len();
        if m == 0 {
            return Err(Error::Invalid(
                "calculus needs at least one basis form".into(),
            ));
        }
        check_dim(m, partials.len())?;
        for p in &partials {
            check_dim(alg.dim(), p.nrows())?;
            check_dim(alg.dim(), p.ncols())?;
        }
        check_dim(m, form_star.nrows())?;
        check_dim(m, form_star.ncols())?;
        let calc = Calculus {
            alg,
            labels,
            partials,
            form_star,
            exterior: None,
        };
        let lr = calc.leibniz_residual();
        if lr > 1e-9 {
            return Err(Error::Invalid(format!(
                "partial derivatives fail the Leibniz rule (residual {lr:.3e})"
            )));
        }
        let ur = calc.unit_residual();
        if ur > 1e-9 {
            return Err(Error::Invalid(format!(
                "partial derivatives do not annihilate the unit (residual {ur:.3e})"
            )));
        }
        Ok(calc)
    }

    /// Attaches a Grassmann exterior square (needed for torsion).
    pub fn with_grassmann(mut self, ds: Vec<Vec<Vec<C64>>>) -> Result<Self> {
        let m = self.nforms();
        check_dim(m, ds.len())?;
        for row in &ds {
            check_dim(m, row.len())?;
            for cell in row {
                check_dim(m, cell.len())?;
            }
        }
        self.exterior = Some(Grassmann { ds });
        Ok(self)
    }

    pub fn algebra(&self) -> &Algebra {
        &self.alg
    }

    pub fn algebra_arc(&self) -> Arc<Algebra> {
        self.alg.clone()
    }

    pub fn nforms(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.alg.dim()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn partial_matrix(&self, a: usize) -> &CMat {
        &self.partials[a]
    }

    pub fn form_star(&self) -> &CMat {
        &self.form_star
    }

    pub fn grassmann(&self) -> Option<&Grassmann> {
        self.exterior.as_ref()
    }

    pub fn partial(&self, a: usize, f: &Elem) -> Elem {
        let v = &self.partials[a] * CVec::from_column_slice(&f.0);
        Elem(v.iter().copied().collect())
    }

    pub fn differential(&self, f: &Elem) -> OneForm {
        OneForm((0..self.nforms()).map(|a| self.partial(a, f)).collect())
    }

    /// (xi_a e^a)* = sum_b J[a][b] (xi_a)* e^b, valid because the basis is central.
    pub fn star_form(&self, xi: &OneForm) -> OneForm {
        let m = self.nforms();
        let stars: Vec<Elem> = xi.0.iter().map(|x| self.alg.star(x)).collect();
        OneForm(
            (0..m)
                .map(|b| {
                    let mut acc = self.alg.zero();
                    for (a, s) in stars.iter().enumerate() {
                        acc.axpy(self.form_star[(a, b)], s);
                    }
                    acc
                })
                .collect(),
        )
    }

    /// Max residual of d(f*) = (df)* over the algebra basis.
    pub fn star_compat_residual(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let f = self.alg.basis(i);
                let lhs = self.differential(&self.alg.star(&f));
                let rhs = self.star_form(&self.differential(&f));
                lhs.dist(&rhs)
            })
            .fold(0.0, f64::max)
    }

    pub fn leibniz_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            let f = self.alg.basis(i);
            for j in 0..d {
                let g = self.alg.basis(j);
                let fg = self.alg.mul(&f, &g);
                for a in 0..self.nforms() {
                    let lhs = self.partial(a, &fg);
                    let rhs = self.alg.mul(&self.partial(a, &f), &g)
                        + self.alg.mul(&f, &self.partial(a, &g));
                    worst = worst.max(lhs.dist(&rhs));
                }
            }
        }
        worst
    }

    pub fn unit_residual(&self) -> f64 {
        let one = self.alg.one();
        (0..self.nforms())
            .map(|a| self.partial(a, &one).max_abs())
            .fold(0.0, f64::max)
    }

    /// Residual of conj(J) J = 1, i.e. the star on forms is an involution.
    pub fn form_star_involution_residual(&self) -> f64 {
        let j = &self.form_star;
        let jbar = j.map(|z| z.conj());
        linalg::max_abs(&(jbar * j - linalg::identity(self.nforms())))
    }

    /// Max residual, over the algebra basis, of sum_a D[c][a][b] partial_a partial_b f - partial_c f.
    pub fn structure_residual(&self, coeffs: &[Vec<Vec<f64>>]) -> f64 {
        let m = self.nforms();
        let mut worst: f64 = 0.0;
        for c in 0..m {
            let mut op = -self.partials[c].clone();
            for a in 0..m {
                for b in 0..m {
                    let k = coeffs[c][a][b];
                    if k != 0.0 {
                        op += (&self.partials[a] * &self.partials[b]) * C64::new(k, 0.0);
                    }
                }
            }
            worst = worst.max(linalg::max_abs(&op));
        }
        worst
    }

    pub fn checks(&self) -> Report {
        let mut r = Report::new();
        r.at_most("leibniz", self.leibniz_residual(), tolerance::IDENTITY);
        r.at_most(
            "unit_annihilated",
            self.unit_residual(),
            tolerance::IDENTITY,
        );
        r.at_most(
            "star_compatibility",
            self.star_compat_residual(),
            tolerance::IDENTITY,
        );
        r.at_most(
            "form_star_involution",
            self.form_star_involution_residual(),
            tolerance::IDENTITY,
        );
        r
    }

    pub fn from_spec(spec: &CalculusSpec) -> Result<Self> {
        if !spec.central_basis {
            return Err(Error::Unsupported(
                "only calculi with a central basis of one-forms are supported".into(),
            ));
        }
        let alg = Arc::new(Algebra::from_spec(&spec.algebra)?);
        let d = alg.dim();
        let m = spec.form_labels.len();
        let partials = spec
            .partials
            .iter()
            .map(|p| {
                pairs_to_mat(p, d, d)
                    .ok_or_else(|| Error::Invalid("partial matrices must be dim x dim".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let star = pairs_to_mat(&spec.form_star, m, m)
            .ok_or_else(|| Error::Invalid("form_star must be nforms x nforms".into()))?;
        Calculus::new(alg, spec.form_labels.clone(), partials, star)
    }
}

fn default_true() -> bool {
    true
}

/// JSON description of a calculus.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalculusSpec {
    pub algebra: AlgebraSpec,
    pub form_labels: Vec<String>,
    /// One dim x dim matrix per basis form, acting on algebra coordinates.
    pub partials: Vec<Vec<Vec<Pair>>>,
    pub form_star: Vec<Vec<Pair>>,
    #[serde(default = "default_true")]
    pub central_basis: bool,
}

/// Matrix of the inner derivation f -> [w, f] on algebra coordinates.
pub fn inner_derivation(alg: &Algebra, w: &Elem) -> CMat {
    let d = alg.dim();
    let mut m = CMat::zeros(d, d);
    for j in 0..d {
        let col = alg.comm(w, &alg.basis(j));
        for i in 0..d {
            m[(i, j)] = col.0[i];
        }
    }
    m
}
