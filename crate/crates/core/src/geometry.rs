//! Bimodule connections with constant braidings, and everything built from them: divergences,
//! the * on vector fields, the kinetic and Ricci quadratic forms, auxiliary conditions,
//! metric compatibility and torsion.
//!
//! Index conventions. `gamma(a, b, c)` is Gamma^a_{bc} with b the form slot and c the field slot:
//! the left connection is nabla e^a = -Gamma^a_{bc} e^b (x) e^c and the dual right connection on
//! vector fields is nabla f_c = Gamma^a_{bc} f_a (x) e^b. The braiding on forms is
//! sigma(e^p (x) e^q) = sum sigma^{pq}_{rs} e^r (x) e^s.

use crate::algebra::{Elem, StateFunctional};
use crate::calculus::{Calculus, OneForm, Tensor2, TensorKind, VectorField};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::report::Report;
use crate::tolerance;
use crate::C64;
use nalgebra::Matrix3;
use std::sync::Arc;

/// A bimodule connection on the one-forms of a central-basis calculus.
#[derive(Clone, Debug)]
pub struct Connection {
    calc: Arc<Calculus>,
    m: usize,
    gamma: Vec<Elem>,
    sigma: Vec<C64>,
    // sigma_L on coefficient vectors: ml[(r,s),(p,q)] = sigma^{pq}_{rs}
    ml: CMat,
    ml_inv: CMat,
    // induced braiding on forms (x) fields: sx[(a,b),(d,c)] = sigma^{ad}_{bc}
    sx_inv: CMat,
    // coefficients of ev o sigma^{-1}: ev_tilde(f_a (x) e^b) = ev_t[(a,b)]
    ev_t: CMat,
    // hat connection: nabla^ f_c = sum e^d (x) f_e ghat[(e,d,c)]
    ghat: Vec<Elem>,
    div_basis: Vec<Elem>,
    sigma_hat: std::result::Result<Vec<C64>, f64>,
    // ev o sigma^ on f_c (x) e^k
    h: CMat,
    // braiding on fields (x) fields: sxx[(u,v),(y,z)] = sigma^{vu}_{zy}
    sxx: CMat,
    sxx_inv: Option<CMat>,
}

impl Connection {
    /// `gamma[(a * m + b) * m + c]` = Gamma^a_{bc};
    /// `sigma[((p * m + q) * m + r) * m + s]` = sigma^{pq}_{rs}.
    pub fn new(calc: Arc<Calculus>, gamma: Vec<Elem>, sigma: Vec<C64>) -> Result<Self> {
        let m = calc.nforms();
        let n = calc.dim();
        check_dim(m * m * m, gamma.len())?;
        for g in &gamma {
            check_dim(n, g.dim())?;
        }
        check_dim(m * m * m * m, sigma.len())?;
        let sg = |p: usize, q: usize, r: usize, s: usize| sigma[((p * m + q) * m + r) * m + s];
        let m2 = m * m;
        let ml = CMat::from_fn(m2, m2, |rs, pq| sg(pq / m, pq % m, rs / m, rs % m));
        let ml_inv = linalg::inverse(&ml)
            .ok_or_else(|| Error::SingularBraiding("braiding on forms is not invertible".into()))?;
        let sx = CMat::from_fn(m2, m2, |ab, dc| sg(ab / m, dc / m, ab % m, dc % m));
        let sx_inv = linalg::inverse(&sx).ok_or_else(|| {
            Error::SingularBraiding("induced braiding on vector fields is not invertible".into())
        })?;
        let ev_t = CMat::from_fn(m, m, |a, b| {
            (0..m).map(|d| sx_inv[(d * m + d, a * m + b)]).sum()
        });
        let sxx = CMat::from_fn(m2, m2, |uv, yz| sg(uv % m, uv / m, yz % m, yz / m));
        let sxx_inv = linalg::inverse(&sxx);

        let alg = calc.algebra();
        let mut ghat = vec![alg.zero(); m * m * m];
        for c in 0..m {
            for d in 0..m {
                for e in 0..m {
                    let mut acc = alg.zero();
                    for a in 0..m {
                        for b in 0..m {
                            acc.axpy(sx_inv[(d * m + e, a * m + b)], &gamma[(a * m + b) * m + c]);
                        }
                    }
                    ghat[(e * m + d) * m + c] = acc;
                }
            }
        }
        let div_basis = (0..m)
            .map(|z| {
                let mut acc = alg.zero();
                for d in 0..m {
                    acc += &ghat[(d * m + d) * m + z];
                }
                acc
            })
            .collect();

        let mut conn = Connection {
            calc,
            m,
            gamma,
            sigma,
            ml,
            ml_inv,
            sx_inv,
            ev_t,
            ghat,
            div_basis,
            sigma_hat: Err(f64::NAN),
            h: CMat::zeros(m, m),
            sxx,
            sxx_inv,
        };
        conn.sigma_hat = conn.solve_sigma_hat();
        if let Ok(sh) = &conn.sigma_hat {
            conn.h = CMat::from_fn(m, m, |c, k| {
                (0..m).map(|d| sh[((c * m + k) * m + d) * m + d]).sum()
            });
        }
        Ok(conn)
    }

    /// Solves sum_k hat^{ck}_{de} partial_k a = delta_{ce} partial_d a + [a, ghat^e_{dc}]
    /// for the constant coefficients of the braiding of the hat connection.
    fn solve_sigma_hat(&self) -> std::result::Result<Vec<C64>, f64> {
        let m = self.m;
        let alg = self.calc.algebra();
        let n = alg.dim();
        let basis: Vec<Elem> = (0..n).map(|i| alg.basis(i)).collect();
        let lhs = CMat::from_fn(n * n, m, |row, k| {
            self.calc.partial(k, &basis[row / n]).0[row % n]
        });
        let mut out = vec![C64::new(0.0, 0.0); m * m * m * m];
        let mut worst: f64 = 0.0;
        for c in 0..m {
            for d in 0..m {
                for e in 0..m {
                    let g = &self.ghat[(e * m + d) * m + c];
                    let mut rhs = CVec::zeros(n * n);
                    for (i, a) in basis.iter().enumerate() {
                        let mut v = alg.comm(a, g);
                        if c == e {
                            v += &self.calc.partial(d, a);
                        }
                        for j in 0..n {
                            rhs[i * n + j] = v.0[j];
                        }
                    }
                    let (x, res) = linalg::lstsq(&lhs, &rhs);
                    worst = worst.max(res);
                    for k in 0..m {
                        out[((c * m + k) * m + d) * m + e] = x[k];
                    }
                }
            }
        }
        if worst > 1e-9 {
            Err(worst)
        } else {
            Ok(out)
        }
    }

    pub fn calculus(&self) -> &Calculus {
        &self.calc
    }

    pub fn calculus_arc(&self) -> Arc<Calculus> {
        self.calc.clone()
    }

    pub fn nforms(&self) -> usize {
        self.m
    }

    pub fn gamma(&self, a: usize, b: usize, c: usize) -> &Elem {
        &self.gamma[(a * self.m + b) * self.m + c]
    }

    pub fn sigma(&self, p: usize, q: usize, r: usize, s: usize) -> C64 {
        self.sigma[((p * self.m + q) * self.m + r) * self.m + s]
    }

    /// Matrix of the braiding on coefficient vectors of Omega^1 (x) Omega^1.
    pub fn sigma_matrix(&self) -> &CMat {
        &self.ml
    }

    /// Coefficients of ev o sigma^{-1} on f_a (x) e^b.
    pub fn ev_tilde(&self) -> &CMat {
        &self.ev_t
    }

    /// div(f_z) for each dual basis field.
    pub fn div_basis(&self) -> &[Elem] {
        &self.div_basis
    }

    fn alg(&self) -> &crate::algebra::Algebra {
        self.calc.algebra()
    }

    fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        self.alg().mul(a, b)
    }

    /// Y[a][b] = D_b X^a = partial_b X^a + Gamma^a_{be} X^e.
    pub fn nabla_vec(&self, x: &VectorField) -> Tensor2 {
        let m = self.m;
        let comps = (0..m)
            .map(|a| {
                (0..m)
                    .map(|b| {
                        let mut acc = self.calc.partial(b, &x.0[a]);
                        for e in 0..m {
                            acc += &self.mul(self.gamma(a, b, e), &x.0[e]);
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Tensor2 {
            kind: TensorKind::FieldForm,
            comps,
        }
    }

    /// Applies the inverse induced braiding: f (x) e components to e (x) f components.
    pub fn unbraid(&self, y: &Tensor2) -> Tensor2 {
        let m = self.m;
        let n = self.calc.dim();
        let mut comps = vec![vec![Elem::zeros(n); m]; m];
        for (d, row) in comps.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                for a in 0..m {
                    for b in 0..m {
                        cell.axpy(self.sx_inv[(d * m + c, a * m + b)], &y.comps[a][b]);
                    }
                }
            }
        }
        Tensor2 {
            kind: TensorKind::FormField,
            comps,
        }
    }

    /// ev applied to the hat connection of X.
    pub fn div_geometric(&self, x: &VectorField) -> Elem {
        let yh = self.unbraid(&self.nabla_vec(x));
        let mut acc = self.alg().zero();
        for d in 0..self.m {
            acc += &yh.comps[d][d];
        }
        acc
    }

    /// The element m with phi(a m) = -phi(X(da)) for every algebra basis element a.
    pub fn div_state(&self, st: &StateFunctional, x: &VectorField) -> Result<Elem> {
        let alg = self.alg();
        let n = alg.dim();
        let p = st.pairing_matrix(alg);
        let p_inv = linalg::inverse(&p).ok_or(Error::DegenerateState)?;
        let rhs = CVec::from_fn(n, |i, _| {
            let a = alg.basis(i);
            let mut xa = alg.zero();
            for b in 0..self.m {
                xa += &self.mul(&self.calc.partial(b, &a), &x.0[b]);
            }
            -st.eval(&xa)
        });
        let sol = &p_inv * &rhs;
        let res = (&p * &sol - &rhs)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if res > 1e-9 {
            return Err(Error::NoStateDivergence(res));
        }
        Ok(Elem(sol.iter().copied().collect()))
    }

    /// Constant coefficients of the hat braiding:
    /// sigma^(f_c (x) e^k) = sum hat[((c*m + k)*m + d)*m + e] e^d (x) f_e.
    pub fn braiding_hat(&self) -> Result<&[C64]> {
        self.sigma_hat.as_deref().map_err(|r| Error::Spanning(*r))
    }

    /// ev o sigma^ on f_c (x) e^k.
    pub fn ev_sigma_hat(&self) -> Result<&CMat> {
        self.braiding_hat()?;
        Ok(&self.h)
    }

    /// ev sigma^(X (x) xi) for a vector field and a one-form.
    pub fn ev_braided(&self, x: &VectorField, xi: &OneForm) -> Result<Elem> {
        let h = self.ev_sigma_hat()?;
        let mut acc = self.alg().zero();
        for c in 0..self.m {
            for k in 0..self.m {
                let z = h[(c, k)];
                if z.norm() != 0.0 {
                    acc.axpy(z, &self.mul(&x.0[c], &xi.0[k]));
                }
            }
        }
        Ok(acc)
    }

    /// X*(xi) = (ev sigma^(X (x) xi*))*.
    pub fn star_vec(&self, x: &VectorField) -> Result<VectorField> {
        let h = self.ev_sigma_hat()?;
        let j = self.calc.form_star();
        let alg = self.alg();
        let stars: Vec<Elem> = x.0.iter().map(|e| alg.star(e)).collect();
        Ok(VectorField(
            (0..self.m)
                .map(|b| {
                    let mut acc = alg.zero();
                    for c in 0..self.m {
                        let coef: C64 = (0..self.m).map(|k| j[(b, k)] * h[(c, k)]).sum();
                        acc.axpy(coef.conj(), &stars[c]);
                    }
                    acc
                })
                .collect(),
        ))
    }

    /// Max deviation of X* from the twisted field componentwise.
    pub fn reality_residual(&self, st: &StateFunctional, x: &VectorField) -> Result<f64> {
        let xs = self.star_vec(x)?;
        Ok(xs
            .0
            .iter()
            .zip(&x.0)
            .map(|(s, e)| s.dist(&st.twist(e)))
            .fold(0.0, f64::max))
    }

    pub fn is_real(&self, st: &StateFunctional, x: &VectorField, tol: f64) -> Result<bool> {
        Ok(self.reality_residual(st, x)? <= tol)
    }

    /// (X + X*)/2, a real field when the twist is trivial.
    pub fn real_part(&self, x: &VectorField) -> Result<VectorField> {
        Ok(x.add(&self.star_vec(x)?).scale(C64::new(0.5, 0.0)))
    }

    fn contract_w(&self, y: &Tensor2) -> (Vec<Elem>, Vec<Elem>) {
        // W[a][d][b] = partial_d Y_ab + Gamma^a_{dc} Y_cb - Y_ae Gamma^e_{db},
        // split as W'' = sigma^{-1} on the (d, b) pair and W' = W - W''.
        let m = self.m;
        let alg = self.alg();
        let idx = |a: usize, d: usize, b: usize| (a * m + d) * m + b;
        let mut w = vec![alg.zero(); m * m * m];
        for a in 0..m {
            for d in 0..m {
                for b in 0..m {
                    let mut acc = self.calc.partial(d, &y.comps[a][b]);
                    for c in 0..m {
                        acc += &self.mul(self.gamma(a, d, c), &y.comps[c][b]);
                        acc -= &self.mul(&y.comps[a][c], self.gamma(c, d, b));
                    }
                    w[idx(a, d, b)] = acc;
                }
            }
        }
        let mut wpp = vec![alg.zero(); m * m * m];
        for a in 0..m {
            for d in 0..m {
                for b in 0..m {
                    let mut acc = alg.zero();
                    for p in 0..m {
                        for q in 0..m {
                            acc.axpy(self.ml_inv[(d * m + b, p * m + q)], &w[idx(a, p, q)]);
                        }
                    }
                    wpp[idx(a, d, b)] = acc;
                }
            }
        }
        let wp = w.iter().zip(&wpp).map(|(x, y)| x - y).collect();
        (wp, wpp)
    }

    fn quadratic_terms(&self, y: &Tensor2) -> (Elem, Elem) {
        let m = self.m;
        let alg = self.alg();
        let yh = self.unbraid(y);
        let mut t1 = alg.zero();
        let mut t2 = alg.zero();
        for a in 0..m {
            for b in 0..m {
                for d in 0..m {
                    let e = self.ev_t[(a, d)];
                    if e.norm() != 0.0 {
                        t1.axpy(e, &self.mul(&y.comps[a][b], &y.comps[b][d]));
                    }
                    // ev (id (x) ev~ (x) id) on e^d (x) f_a (x) e^b (x) f_d'
                    let e2 = self.ev_t[(a, b)];
                    if e2.norm() != 0.0 {
                        t2.axpy(e2, &self.mul(&yh.comps[d][a], &yh.comps[b][d]));
                    }
                }
            }
        }
        (t1, t2)
    }

    /// Kinetic form F(X).
    pub fn f_kinetic(&self, x: &VectorField) -> Elem {
        let (t1, t2) = self.quadratic_terms(&self.nabla_vec(x));
        (t1 + t2).scale(C64::new(0.5, 0.0))
    }

    /// Ricci quadratic form R(X).
    pub fn r_quadratic(&self, x: &VectorField) -> Elem {
        let m = self.m;
        let alg = self.alg();
        let y = self.nabla_vec(x);
        let (t1, t2) = self.quadratic_terms(&y);
        let (wp, wpp) = self.contract_w(&y);
        let idx = |a: usize, d: usize, b: usize| (a * m + d) * m + b;
        let mut tb = alg.zero();
        for a in 0..m {
            for d in 0..m {
                let e = self.ev_t[(a, d)];
                if e.norm() == 0.0 {
                    continue;
                }
                for b in 0..m {
                    tb.axpy(e, &self.mul(&wp[idx(a, d, b)], &x.0[b]));
                }
            }
        }
        let mut tr = alg.zero();
        for a in 0..m {
            for b in 0..m {
                tr.axpy(self.ev_t[(a, b)], &y.comps[a][b]);
            }
        }
        let mut ta = alg.zero();
        for s in 0..m {
            let mut coef = self.calc.partial(s, &tr);
            for a in 0..m {
                for r in 0..m {
                    coef.axpy(-self.ev_t[(a, r)], &wpp[idx(a, r, s)]);
                }
            }
            ta += &self.mul(&coef, &x.0[s]);
        }
        let half = C64::new(0.5, 0.0);
        tb - ta + (t1 - t2).scale(half)
    }

    /// The one-form nabla nabla(ev~)(f_i (x) e^j) for each basis pair, as a max-abs residual.
    pub fn nabla_ev_tilde_residual(&self) -> f64 {
        let m = self.m;
        let alg = self.alg();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let mut y = Tensor2::zeros(TensorKind::FieldForm, m, alg.dim());
                y.comps[i][j] = alg.one();
                let (_, wpp) = self.contract_w(&y);
                for s in 0..m {
                    let mut v = alg.zero();
                    for a in 0..m {
                        for r in 0..m {
                            v.axpy(self.ev_t[(a, r)], &wpp[(a * m + r) * m + s]);
                        }
                    }
                    worst = worst.max(v.max_abs());
                }
            }
        }
        worst
    }

    /// Da/Dt = a_dot + (ev(da (x) X) + ev sigma^(X (x) da)) / 2.
    pub fn convective_derivative(&self, a_dot: &Elem, a: &Elem, x: &VectorField) -> Result<Elem> {
        let da = self.calc.differential(a);
        let mut acc = self.alg().zero();
        for b in 0..self.m {
            acc += &self.mul(&da.0[b], &x.0[b]);
        }
        acc += &self.ev_braided(x, &da)?;
        Ok(a_dot + &acc.scale(C64::new(0.5, 0.0)))
    }

    /// Residual of the left-form metric compatibility for a metric with scalar coefficients.
    pub fn metric_compat_residual(&self, g: &CMat) -> Result<f64> {
        let m = self.m;
        check_dim(m, g.nrows())?;
        check_dim(m, g.ncols())?;
        let alg = self.alg();
        let mut res = vec![alg.zero(); m * m * m];
        let idx = |a: usize, b: usize, c: usize| (a * m + b) * m + c;
        for i in 0..m {
            for j in 0..m {
                if g[(i, j)].norm() == 0.0 {
                    continue;
                }
                for a in 0..m {
                    for b in 0..m {
                        // (nabla (x) id) g
                        res[idx(a, b, j)].axpy(-g[(i, j)], self.gamma(i, a, b));
                        // (sigma (x) id)(id (x) nabla) g
                        for r in 0..m {
                            for s in 0..m {
                                let k = self.sigma(i, a, r, s);
                                if k.norm() != 0.0 {
                                    res[idx(r, s, b)].axpy(-k * g[(i, j)], self.gamma(j, a, b));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(res.iter().map(Elem::max_abs).fold(0.0, f64::max))
    }

    /// Residual of the bimodule condition: sum_d sigma^{ad}_{bc} partial_d f
    /// = delta_{ac} partial_b f + [Gamma^a_{bc}, f] on the algebra basis.
    pub fn bimodule_residual(&self) -> f64 {
        let m = self.m;
        let alg = self.alg();
        let mut worst: f64 = 0.0;
        for i in 0..alg.dim() {
            let f = alg.basis(i);
            let df: Vec<Elem> = (0..m).map(|d| self.calc.partial(d, &f)).collect();
            for a in 0..m {
                for b in 0..m {
                    for c in 0..m {
                        let mut lhs = alg.zero();
                        for (d, dfd) in df.iter().enumerate() {
                            lhs.axpy(self.sigma(a, d, b, c), dfd);
                        }
                        let mut rhs = alg.comm(self.gamma(a, b, c), &f);
                        if a == c {
                            rhs += &df[b];
                        }
                        worst = worst.max(lhs.dist(&rhs));
                    }
                }
            }
        }
        worst
    }

    /// Largest |phi(div X)| over the fields f_z b_i, and largest gap between the geometric
    /// and state divergences over the same fields.
    pub fn divergence_agreement(&self, st: &StateFunctional) -> Result<(f64, f64)> {
        let alg = self.alg();
        let mut phi_div: f64 = 0.0;
        let mut gap: f64 = 0.0;
        for z in 0..self.m {
            for i in 0..alg.dim() {
                let mut x = VectorField::zeros(self.m, alg.dim());
                x.0[z] = alg.basis(i);
                let dg = self.div_geometric(&x);
                phi_div = phi_div.max(st.eval(&dg).norm());
                gap = gap.max(dg.dist(&self.div_state(st, &x)?));
            }
        }
        Ok((phi_div, gap))
    }

    /// sigma_XX(X (x) X) - X (x) X.
    pub fn aux_old_residual(&self, x: &VectorField) -> Tensor2 {
        let m = self.m;
        let u = self.field_square(x);
        let mut out = Tensor2::zeros(TensorKind::FieldField, m, self.calc.dim());
        for a in 0..m {
            for b in 0..m {
                let cell = &mut out.comps[a][b];
                for p in 0..m {
                    for q in 0..m {
                        cell.axpy(self.sxx[(a * m + b, p * m + q)], &u[p][q]);
                    }
                }
                *cell -= &u[a][b];
            }
        }
        out
    }

    fn field_square(&self, x: &VectorField) -> Vec<Vec<Elem>> {
        (0..self.m)
            .map(|y| (0..self.m).map(|z| self.mul(&x.0[y], &x.0[z])).collect())
            .collect()
    }

    /// (id (x) ev)(nabla_X (x) id + id (x) nabla^)(id - sigma_XX^{-1})(X (x) X).
    pub fn aux_improved_residual(&self, x: &VectorField) -> Result<VectorField> {
        let m = self.m;
        let inv = self.sxx_inv.as_ref().ok_or_else(|| {
            Error::SingularBraiding("braiding on vector field pairs is not invertible".into())
        })?;
        let u = self.field_square(x);
        let mut v = u.clone();
        for y in 0..m {
            for z in 0..m {
                for p in 0..m {
                    for q in 0..m {
                        v[y][z].axpy(-inv[(y * m + z, p * m + q)], &u[p][q]);
                    }
                }
            }
        }
        Ok(VectorField(
            (0..m)
                .map(|a| {
                    let mut acc = self.alg().zero();
                    for z in 0..m {
                        for y in 0..m {
                            acc += &self.mul(self.gamma(a, z, y), &v[y][z]);
                        }
                        acc += &self.calc.partial(z, &v[a][z]);
                        acc += &self.mul(&v[a][z], &self.div_basis[z]);
                    }
                    acc
                })
                .collect(),
        ))
    }

    /// Torsion with respect to the Grassmann exterior square:
    /// T(e^i) = wedge(sigma^{-1} nabla e^i) + d e^i, as t[i][j][k] for the e^j ^ e^k coefficient.
    pub fn torsion_direct(&self) -> Result<Vec<Vec<Vec<Elem>>>> {
        let ext = self.calc.grassmann().ok_or_else(|| {
            Error::Unsupported("torsion needs a Grassmann exterior square".into())
        })?;
        let m = self.m;
        let alg = self.alg();
        let mut out = vec![vec![vec![alg.zero(); m]; m]; m];
        for (i, ti) in out.iter_mut().enumerate() {
            let mut w = vec![alg.zero(); m * m];
            for (pq, wpq) in w.iter_mut().enumerate() {
                for b in 0..m {
                    for c in 0..m {
                        wpq.axpy(-self.ml_inv[(pq, b * m + c)], self.gamma(i, b, c));
                    }
                }
            }
            for j in 0..m {
                for k in 0..m {
                    let mut t = &w[j * m + k] - &w[k * m + j];
                    t += &alg.scalar(ext.ds[i][j][k]);
                    ti[j][k] = t;
                }
            }
        }
        Ok(out)
    }

    /// Index form Gamma^i_{jk} - Gamma^i_{kj} + (d e^i)_{jk}; equals the direct torsion when
    /// the braiding is the flip.
    pub fn torsion_index(&self) -> Result<Vec<Vec<Vec<Elem>>>> {
        let ext = self.calc.grassmann().ok_or_else(|| {
            Error::Unsupported("torsion needs a Grassmann exterior square".into())
        })?;
        let m = self.m;
        let alg = self.alg();
        Ok((0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        (0..m)
                            .map(|k| {
                                self.gamma(i, j, k) - self.gamma(i, k, j)
                                    + alg.scalar(ext.ds[i][j][k])
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect())
    }

    /// Structural checks that need no sample fields.
    pub fn checks(&self, st: &StateFunctional) -> Report {
        let mut r = Report::new();
        r.at_most("bimodule", self.bimodule_residual(), tolerance::IDENTITY);
        match self.braiding_hat() {
            Ok(_) => r.at_most("hat_braiding_spanning", 0.0, tolerance::IDENTITY),
            Err(Error::Spanning(res)) => {
                r.at_most("hat_braiding_spanning", res, tolerance::IDENTITY)
            }
            Err(_) => r.at_most("hat_braiding_spanning", f64::INFINITY, tolerance::IDENTITY),
        }
        match self.divergence_agreement(st) {
            Ok((phi_div, gap)) => {
                r.at_most("phi_of_div", phi_div, tolerance::IDENTITY);
                r.at_most("div_geometric_vs_state", gap, tolerance::DERIVED);
            }
            Err(_) => r.at_most("phi_of_div", f64::INFINITY, tolerance::IDENTITY),
        }
        r.at_most(
            "nabla_ev_tilde",
            self.nabla_ev_tilde_residual(),
            tolerance::IDENTITY,
        );
        r
    }
}

/// Totally antisymmetric symbol on three indices.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Constant Christoffel array for the three-form calculus, `g[i][j][k]` = Gamma^i_{jk}.
pub type Christoffel3 = [[[f64; 3]; 3]; 3];

/// The constant-coefficient torsion-free metric-compatible connection for a metric g:
/// Gamma^i_{jk} = (1/2) g^{il} (2 eps_{lkm} g_{mj} + Tr(g) eps_{ljk}).
pub fn fuzzy_qlc_gamma(g: &Matrix3<f64>) -> Result<Christoffel3> {
    let gi = g
        .try_inverse()
        .ok_or_else(|| Error::Invalid("metric is singular".into()))?;
    let tr = g.trace();
    let mut out = [[[0.0; 3]; 3]; 3];
    for (i, oi) in out.iter_mut().enumerate() {
        for (j, oij) in oi.iter_mut().enumerate() {
            for (k, v) in oij.iter_mut().enumerate() {
                let mut acc = 0.0;
                for l in 0..3 {
                    let mut inner = tr * levi_civita(l, j, k);
                    for mm in 0..3 {
                        inner += 2.0 * levi_civita(l, k, mm) * g[(mm, j)];
                    }
                    acc += gi[(i, l)] * inner;
                }
                *v = 0.5 * acc;
            }
        }
    }
    Ok(out)
}

/// Ricci tensor of a constant connection from the index formula
/// R_mn = (1/2)(Gamma^i_{jn} eps_{imj} + Gamma^i_{mj} Gamma^j_{in} - Gamma^i_{ij} Gamma^j_{mn}).
pub fn fuzzy_ricci_index(gamma: &Christoffel3) -> Matrix3<f64> {
    Matrix3::from_fn(|m, n| {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += gamma[i][j][n] * levi_civita(i, m, j);
                acc += gamma[i][m][j] * gamma[j][i][n];
                acc -= gamma[i][i][j] * gamma[j][m][n];
            }
        }
        0.5 * acc
    })
}

/// Closed-form Ricci tensor of the constant-coefficient connection, with raised
/// antisymmetric-symbol indices taken through the inverse metric.
pub fn fuzzy_ricci_closed(g: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let gi = g
        .try_inverse()
        .ok_or_else(|| Error::Invalid("metric is singular".into()))?;
    let tr = g.trace();
    let tri = gi.trace();
    // eps with its first index raised, and with its first two indices raised
    let e1 = |i: usize, t: usize, mm: usize| {
        (0..3)
            .map(|a| gi[(i, a)] * levi_civita(a, t, mm))
            .sum::<f64>()
    };
    let e2 = |i: usize, j: usize, p: usize| {
        let mut acc = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                acc += gi[(i, a)] * gi[(j, b)] * levi_civita(a, b, p);
            }
        }
        acc
    };
    let mut out = Matrix3::zeros();
    for s in 0..3 {
        for t in 0..3 {
            let mut t1 = 0.0;
            let mut t4 = 0.0;
            let mut t5 = 0.0;
            for i in 0..3 {
                for mm in 0..3 {
                    for j in 0..3 {
                        t1 += e1(i, t, mm) * g[(mm, j)] * levi_civita(j, i, s);
                    }
                }
                for j in 0..3 {
                    for p in 0..3 {
                        t4 += e2(i, j, p) * levi_civita(i, j, s) * g[(p, t)];
                    }
                    t5 += e2(i, j, t) * levi_civita(i, j, s);
                }
            }
            let delta = if s == t { 1.0 } else { 0.0 };
            out[(s, t)] = 0.5 * t1 + 0.5 * tri * g[(s, t)] - 0.5 * delta
                + 0.5 * tr * (gi[(s, t)] - tri * delta - 0.5 * t4)
                + tr * tr / 8.0 * t5;
        }
    }
    Ok(out)
}

/// Scalar curvature (Tr(g^2) - Tr(g)^2 / 2) / (2 det g).
pub fn fuzzy_scalar_closed(g: &Matrix3<f64>) -> f64 {
    0.5 * ((g * g).trace() - 0.5 * g.trace().powi(2)) / g.determinant()
}

/// Reference Ricci tensor (1 + rho^2)(s (x) t + t (x) s) of the 2x2 matrix geometry.
pub fn ricci_m2_reference(rho: C64) -> CMat {
    let k = C64::new(1.0, 0.0) + rho * rho;
    CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), k, k, C64::new(0.0, 0.0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(a: f64, b: f64, c: f64) -> Matrix3<f64> {
        Matrix3::from_diagonal(&nalgebra::Vector3::new(a, b, c))
    }

    #[test]
    fn round_metric_gamma_is_half_epsilon() {
        let g = fuzzy_qlc_gamma(&Matrix3::identity()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert!((g[i][j][k] - 0.5 * levi_civita(i, j, k)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn round_metric_ricci_and_scalar() {
        let r = fuzzy_ricci_closed(&Matrix3::identity()).unwrap();
        assert!((r - Matrix3::identity() * -0.25).abs().max() < 1e-14);
        assert!((fuzzy_scalar_closed(&Matrix3::identity()) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn index_ricci_of_scaled_epsilon() {
        // Gamma = c eps gives (c^2 - c) delta; only c = 1/2 reproduces -1/4.
        for (c, want) in [(0.5, -0.25), (1.0, 0.0), (-0.5, 0.75)] {
            let mut g = [[[0.0; 3]; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        g[i][j][k] = c * levi_civita(i, j, k);
                    }
                }
            }
            let r = fuzzy_ricci_index(&g);
            assert!(
                (r - Matrix3::identity() * want).abs().max() < 1e-14,
                "c = {c}"
            );
        }
    }

    #[test]
    fn closed_and_index_ricci_agree_for_general_metrics() {
        let gs = [
            diag(4.0, 3.0, 1.0),
            Matrix3::new(2.0, 0.3, 0.1, 0.3, 1.5, 0.2, 0.1, 0.2, 1.0),
        ];
        for g in gs {
            let closed = fuzzy_ricci_closed(&g).unwrap();
            let index = fuzzy_ricci_index(&fuzzy_qlc_gamma(&g).unwrap());
            assert!((closed - index).abs().max() < 1e-12);
            let s = (g.try_inverse().unwrap() * closed).trace();
            assert!((s - fuzzy_scalar_closed(&g)).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_for_diag_431() {
        // (26 - 32) / 2 / 12
        assert!((fuzzy_scalar_closed(&diag(4.0, 3.0, 1.0)) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn m2_reference_ricci() {
        assert_eq!(linalg::max_abs(&ricci_m2_reference(crate::I)), 0.0);
        let r = ricci_m2_reference(C64::new(0.0, 2.0));
        assert_eq!(r[(0, 1)], C64::new(-3.0, 0.0));
        assert_eq!(r[(1, 0)], C64::new(-3.0, 0.0));
        assert_eq!(r[(0, 0)], C64::new(0.0, 0.0));
    }
}
