//! Concrete geometries: the 2x2 matrix algebra with its one-parameter family of connections,
//! the reduced (2x2) fuzzy sphere with the constant-coefficient connection, the constant-field
//! fuzzy subsystem, and user models from JSON.

use crate::algebra::{
    elem_to_matrix, matrix_to_elem, state_checks, Algebra, Elem, StateFunctional,
};
use crate::calculus::{inner_derivation, Calculus, CalculusSpec, VectorField};
use crate::encoding::{from_pair, pairs_to_mat, pairs_to_vec, Pair};
use crate::error::{check_dim, Error, Result};
use crate::flows::{oracles, FlowState, GeodesicModel, Monitor, OdeSystem};
use crate::geometry::{fuzzy_qlc_gamma, levi_civita, ricci_m2_reference, Connection};
use crate::linalg::{self, CMat};
use crate::report::Report;
use crate::tolerance;
use crate::{C64, I};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn mat2(a: C64, b: C64, c: C64, d: C64) -> CMat {
    CMat::from_row_slice(2, 2, &[a, b, c, d])
}

fn e12() -> Elem {
    Elem::basis(4, 1)
}

fn e21() -> Elem {
    Elem::basis(4, 2)
}

// ---------------------------------------------------------------------------------------------
// 2x2 matrices

/// Braiding table of the rho-family: row p*2+q lists sigma(e^p (x) e^q) in the basis
/// ss, st, ts, tt.
pub fn m2_sigma_rows(rho: C64) -> [[C64; 4]; 4] {
    let (o, z) = (re(1.0), re(0.0));
    [
        [o, rho, -rho, z],
        [rho, z, -o, -rho],
        [rho, -o, z, -rho],
        [z, rho, -rho, o],
    ]
}

/// Christoffel elements Gamma^a_{bc}, index (a*2 + b)*2 + c, with s = 0 and t = 1.
pub fn m2_gamma(rho: C64) -> Vec<Elem> {
    let (p, q) = (e12(), e21());
    let mut g = vec![Elem::zeros(4); 8];
    let two = re(2.0);
    g[0] = q.scale(rho); // s ss
    g[1] = p.scale(rho); // s st
    g[2] = -(p.scale(rho) + q.scale(two)); // s ts
    g[3] = -q.scale(rho); // s tt
    g[4] = p.scale(rho); // t ss
    g[5] = q.scale(rho) - p.scale(two); // t st
    g[6] = -q.scale(rho); // t ts
    g[7] = -p.scale(rho); // t tt
    g
}

/// The {s, t} calculus on M_2 with partial_s = [E12, .] and partial_t = [E21, .], and s* = -t.
pub fn m2_calculus() -> Calculus {
    let alg = Arc::new(Algebra::matrix(2));
    let ds = inner_derivation(&alg, &e12());
    let dt = inner_derivation(&alg, &e21());
    let j = mat2(re(0.0), re(-1.0), re(-1.0), re(0.0));
    Calculus::new(alg, vec!["s".into(), "t".into()], vec![ds, dt], j).expect("inner calculus")
}

/// The 2x2 matrix geometry for an imaginary nonzero braiding parameter rho.
pub fn build_m2(rho: C64) -> Result<GeodesicModel> {
    if !rho.re.is_finite() || !rho.im.is_finite() {
        return Err(Error::Invalid("rho must be finite".into()));
    }
    if rho.re.abs() > 1e-12 * rho.norm().max(1.0) {
        return Err(Error::Invalid(format!(
            "rho = {rho} must be purely imaginary for the connection to be *-preserving"
        )));
    }
    if rho.norm() == 0.0 {
        return Err(Error::Invalid(
            "rho = 0 admits no nonzero real geodesic velocity fields".into(),
        ));
    }
    let rho = C64::new(0.0, rho.im);
    let calc = Arc::new(m2_calculus());
    let rows = m2_sigma_rows(rho);
    let mut sigma = vec![re(0.0); 16];
    for (pq, row) in rows.iter().enumerate() {
        for (rs, v) in row.iter().enumerate() {
            sigma[pq * 4 + rs] = *v;
        }
    }
    let conn = Connection::new(calc, m2_gamma(rho), sigma)?;
    let mut model = GeodesicModel::new(
        "m2",
        conn,
        StateFunctional::normalized_trace(2),
        linalg::identity(2),
    );
    model.params.insert("rho".into(), rho);
    model.velocity_override = Some(m2_velocity_explicit);
    model.amplitude_override = Some(m2_amplitude_explicit);
    model.aux_override = Some(m2_aux_closed);
    model.f_closed = Some(m2_f_closed);
    model.r_closed = Some(m2_r_closed);
    model.conserved.push(("sum_abs2".into(), m2_sum_abs2));
    Ok(model)
}

fn m2_sum_abs2(_m: &GeodesicModel, st: &FlowState) -> f64 {
    st.e.0.iter().map(|z| z.norm_sqr()).sum()
}

/// The explicit velocity equations of the matrix model.
pub fn m2_velocity_explicit(model: &GeodesicModel, x: &VectorField) -> VectorField {
    let alg = model.conn.calculus().algebra();
    let rho = model.param("rho");
    let (p, q) = (e12(), e21());
    let (xs, xt) = (&x.0[0], &x.0[1]);
    let mul = |a: &Elem, b: &Elem| alg.mul(a, b);
    let div = alg.comm(&p, xs) + alg.comm(&q, xt);
    let half = re(0.5);
    let xss = mul(xs, xs);
    let xst = mul(xs, xt);
    let xts = mul(xt, xs);
    let xtt = mul(xt, xt);
    let vs = alg.comm(&div, xs).scale(half)
        - mul(&alg.comm(&p, xs), xs)
        - mul(&alg.comm(&q, xs), xt)
        - (mul(&q, &xss).scale(rho) - mul(&(q.scale(re(2.0)) + p.scale(rho)), &xst)
            + mul(&p, &xts).scale(rho)
            - mul(&q, &xtt).scale(rho));
    let vt = alg.comm(&div, xt).scale(half)
        - mul(&alg.comm(&p, xt), xs)
        - mul(&alg.comm(&q, xt), xt)
        - (mul(&p, &xss).scale(rho)
            - mul(&q, &xst).scale(rho)
            - mul(&(p.scale(re(2.0)) - q.scale(rho)), &xts)
            - mul(&p, &xtt).scale(rho));
    VectorField(vec![vs, vt])
}

/// e' = -[E12, e] X^s - [E21, e] X^t - e kappa.
pub fn m2_amplitude_explicit(model: &GeodesicModel, e: &Elem, x: &VectorField) -> Elem {
    let alg = model.conn.calculus().algebra();
    let (p, q) = (e12(), e21());
    let kappa = (alg.comm(&p, &x.0[0]) + alg.comm(&q, &x.0[1])).scale(re(0.5));
    -(alg.mul(&alg.comm(&p, e), &x.0[0]) + alg.mul(&alg.comm(&q, e), &x.0[1]) + alg.mul(e, &kappa))
}

/// {E12, {X^s, X^t} - rho((X^s)^2 - (X^t)^2)} + rho [E21, [X^s, X^t]] as a one-component field.
pub fn m2_aux_closed(model: &GeodesicModel, x: &VectorField) -> VectorField {
    let alg = model.conn.calculus().algebra();
    let rho = model.param("rho");
    let (xs, xt) = (&x.0[0], &x.0[1]);
    let inner = alg.anticomm(xs, xt) - (alg.mul(xs, xs) - alg.mul(xt, xt)).scale(rho);
    let v = alg.anticomm(&e12(), &inner) + alg.comm(&e21(), &alg.comm(xs, xt)).scale(rho);
    VectorField(vec![v])
}

/// Kinetic form in terms of Y_ab = D_b X^a.
pub fn m2_f_closed(model: &GeodesicModel, x: &VectorField) -> Elem {
    let alg = model.conn.calculus().algebra();
    let rho = model.param("rho");
    let y = model.conn.nabla_vec(x);
    let g = |a: usize, b: usize| &y.comps[a][b];
    let mul = |a: &Elem, b: &Elem| alg.mul(a, b);
    let mut f = alg.zero();
    for a in 0..2 {
        for b in 0..2 {
            f += &mul(g(a, b), g(b, a));
        }
    }
    let (ss, st, ts, tt) = (g(0, 0), g(0, 1), g(1, 0), g(1, 1));
    let lin = mul(ts, ss) + mul(ss, ts) - mul(tt, st) - mul(st, tt);
    let a = st + ts;
    let b = ss + tt;
    let quad = mul(&a, &a) - mul(&b, &b);
    f + lin.scale(rho) + quad.scale(rho * rho)
}

/// Ricci quadratic form in terms of the matrix entries of X^s and X^t.
pub fn m2_r_closed(model: &GeodesicModel, x: &VectorField) -> Elem {
    let alg = model.conn.calculus().algebra();
    let rho = model.param("rho");
    let xs = elem_to_matrix(&x.0[0], 2);
    let xt = elem_to_matrix(&x.0[1], 2);
    let (a_s, b_s, c_s, d_s) = (xs[(0, 0)], xs[(0, 1)], xs[(1, 0)], xs[(1, 1)]);
    let (a_t, b_t, c_t, d_t) = (xt[(0, 0)], xt[(0, 1)], xt[(1, 0)], xt[(1, 1)]);
    let m1 = mat2(
        b_s * b_t - c_s * c_t,
        -a_s * c_t - c_s * d_t,
        a_s * b_t + b_s * d_t,
        b_s * b_t - c_s * c_t,
    );
    let q = -b_s * b_s + b_t * b_t + c_s * c_s - c_t * c_t;
    let m2 = mat2(
        q,
        (a_s + d_s) * (b_t + c_s) - (a_t + d_t) * (b_s + c_t),
        -(a_s + d_s) * (b_s + c_t) + (a_t + d_t) * (b_t + c_s),
        q,
    );
    let r = (&xs * &xt + &xt * &xs) * re(-2.0)
        + (&xs * &xs - &xt * &xt + m1) * (rho * 2.0)
        + m2 * (rho * rho);
    let _ = alg;
    matrix_to_elem(&r)
}

/// Closed form of the divergence element kappa on the simple harmonic geodesic.
pub fn m2_kappa_closed(alpha: f64, beta: f64, delta: f64, t: f64) -> CMat {
    let (s, c) = (2.0 * delta * t).sin_cos();
    let a = alpha * c + beta * s;
    let b = beta * c - alpha * s;
    let w = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    mat2(re(b), w * a, w.conj() * a, re(-b))
}

/// The vector field with X^s the given matrix and X^t = -(X^s)^dagger.
pub fn m2_real_field(xs: &CMat) -> VectorField {
    VectorField(vec![matrix_to_elem(xs), matrix_to_elem(&(-xs.adjoint()))])
}

/// The velocity field of the four-parameter family at parameters (a, b, c, d).
pub fn m2_family_field(p: [f64; 4]) -> VectorField {
    m2_real_field(&oracles::m2_family_matrix(p))
}

/// Reference Ricci tensor of a built matrix model.
pub fn ricci_reference_m2(model: &GeodesicModel) -> CMat {
    ricci_m2_reference(model.param("rho"))
}

// ---------------------------------------------------------------------------------------------
// reduced fuzzy sphere

/// Pauli matrices.
pub fn pauli(i: usize) -> CMat {
    let (o, z) = (re(1.0), re(0.0));
    match i {
        0 => mat2(z, o, o, z),
        1 => mat2(z, -I, I, z),
        _ => mat2(o, z, z, -o),
    }
}

/// Generators x_i = sigma_i / 2 of the reduced fuzzy sphere at lambda = 1/2.
pub fn fuzzy_generator(i: usize) -> Elem {
    matrix_to_elem(&(pauli(i) * re(0.5)))
}

/// Which amplitude equation the reduced fuzzy model integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum AmplitudeForm {
    /// The time-ordered Hamiltonian form on (psi, phi); unitary.
    #[default]
    Hamiltonian,
    /// The generic ordering -(partial_i e) X^i - e kappa; unitary.
    Generic,
    /// The ordering -X^i partial_i e - e kappa; not unitary for non-central X.
    LeftOrdered,
}

/// Three-form calculus on M_2 with partial_i = -i [x_i, .], self-adjoint basis, and the
/// Grassmann exterior square with d s^i = -(1/2) eps_ijk s^j ^ s^k.
pub fn fuzzy_calculus() -> Calculus {
    let alg = Arc::new(Algebra::matrix(2));
    let partials = (0..3)
        .map(|i| inner_derivation(&alg, &fuzzy_generator(i)) * C64::new(0.0, -1.0))
        .collect();
    let calc = Calculus::new(
        alg,
        vec!["1".into(), "2".into(), "3".into()],
        partials,
        linalg::identity(3),
    )
    .expect("fuzzy calculus");
    let ds = (0..3)
        .map(|i| {
            (0..3)
                .map(|j| (0..3).map(|k| re(-levi_civita(i, j, k))).collect())
                .collect()
        })
        .collect();
    calc.with_grassmann(ds).expect("three forms")
}

fn check_metric(g: &Matrix3<f64>) -> Result<()> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("metric entries must be finite".into()));
    }
    if (g - g.transpose()).abs().max() > 1e-12 {
        return Err(Error::Invalid("metric must be symmetric".into()));
    }
    if g.determinant().abs() < 1e-12 {
        return Err(Error::Invalid("metric is singular".into()));
    }
    Ok(())
}

/// Whether a symmetric metric is positive definite (otherwise it is accepted but flagged).
pub fn metric_is_positive(g: &Matrix3<f64>) -> bool {
    g.cholesky().is_some()
}

pub fn build_fuzzy_n2(g: &Matrix3<f64>) -> Result<GeodesicModel> {
    build_fuzzy_n2_with(g, AmplitudeForm::default())
}

pub fn build_fuzzy_n2_with(g: &Matrix3<f64>, form: AmplitudeForm) -> Result<GeodesicModel> {
    check_metric(g)?;
    let calc = Arc::new(fuzzy_calculus());
    let gam = fuzzy_qlc_gamma(g)?;
    let alg = calc.algebra();
    let mut gamma = Vec::with_capacity(27);
    for gi in &gam {
        for gij in gi {
            for v in gij {
                gamma.push(alg.scalar(re(*v)));
            }
        }
    }
    // flip: sigma^{pq}_{rs} = delta_ps delta_qr
    let mut sigma = vec![re(0.0); 81];
    for p in 0..3 {
        for q in 0..3 {
            sigma[((p * 3 + q) * 3 + q) * 3 + p] = re(1.0);
        }
    }
    let conn = Connection::new(calc, gamma, sigma)?;
    let metric = CMat::from_fn(3, 3, |i, j| re(g[(i, j)]));
    let mut model = GeodesicModel::new(
        "fuzzy_n2",
        conn,
        StateFunctional::normalized_trace(2),
        metric,
    );
    for i in 0..3 {
        model
            .params
            .insert(format!("g{}{}", i + 1, i + 1), re(g[(i, i)]));
    }
    model.params.insert(
        "lorentzian".into(),
        re(if metric_is_positive(g) { 0.0 } else { 1.0 }),
    );
    model.amplitude_override = match form {
        AmplitudeForm::Hamiltonian => Some(fuzzy_amplitude_hamiltonian),
        AmplitudeForm::Generic => None,
        AmplitudeForm::LeftOrdered => Some(fuzzy_amplitude_left),
    };
    model.aux_override = Some(fuzzy_aux_closed);
    model.f_closed = Some(fuzzy_f_closed);
    model.r_closed = Some(fuzzy_r_closed);
    model
        .conserved
        .push(("phi_psi_norm".into(), fuzzy_phi_psi_norm));
    Ok(model)
}

fn gamma_scalar(model: &GeodesicModel, a: usize, b: usize, c: usize) -> C64 {
    // constant Christoffels are multiples of the unit E11 + E22
    model.conn.gamma(a, b, c).0[0]
}

/// e' = -X^i partial_i e - e kappa.
pub fn fuzzy_amplitude_left(model: &GeodesicModel, e: &Elem, x: &VectorField) -> Elem {
    let calc = model.conn.calculus();
    let alg = calc.algebra();
    let mut acc = -alg.mul(e, &model.kappa(x));
    for i in 0..3 {
        acc -= &alg.mul(&x.0[i], &calc.partial(i, e));
    }
    acc
}

/// Components (psi, phi) of e = psi^i x_i + phi / 2.
pub fn fuzzy_amplitude_coords(e: &Elem) -> [C64; 4] {
    let m = elem_to_matrix(e, 2);
    let tr = |p: &CMat| (p * &m).trace();
    [tr(&pauli(0)), tr(&pauli(1)), tr(&pauli(2)), m.trace()]
}

pub fn fuzzy_amplitude_from_coords(v: [C64; 4]) -> Elem {
    let mut m = linalg::identity(2) * (v[3] * 0.5);
    for (i, vi) in v.iter().take(3).enumerate() {
        m += pauli(i) * (vi * 0.5);
    }
    matrix_to_elem(&m)
}

/// Linear-plus-constant decomposition X^i = X^{ij} x_j + f^i of a reduced fuzzy field.
pub fn fuzzy_field_parts(x: &VectorField) -> (nalgebra::Matrix3<C64>, Vector3<C64>) {
    let mut xm = nalgebra::Matrix3::<C64>::zeros();
    let mut f = Vector3::<C64>::zeros();
    for i in 0..3 {
        let m = elem_to_matrix(&x.0[i], 2);
        for j in 0..3 {
            xm[(i, j)] = (pauli(j) * &m).trace();
        }
        f[i] = m.trace() * 0.5;
    }
    (xm, f)
}

/// X^i = X^{ij} x_j + f^i for real data.
pub fn fuzzy_field(xm: &Matrix3<f64>, f: &Vector3<f64>) -> VectorField {
    VectorField(
        (0..3)
            .map(|i| {
                let mut m = linalg::identity(2) * re(f[i]);
                for j in 0..3 {
                    m += pauli(j) * re(0.5 * xm[(i, j)]);
                }
                matrix_to_elem(&m)
            })
            .collect(),
    )
}

/// kappa^k = (1/2) X^{ij} eps_ijk.
pub fn fuzzy_kappa_vector<T>(xm: &nalgebra::Matrix3<T>) -> Vector3<T>
where
    T: nalgebra::Scalar + num_traits_lite::Field,
{
    Vector3::from_fn(|k, _| {
        let mut acc = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                let e = levi_civita(i, j, k);
                if e != 0.0 {
                    acc = acc + T::from_f64(0.5 * e) * xm[(i, j)].clone();
                }
            }
        }
        acc
    })
}

/// Minimal numeric trait so the kappa helper serves both real and complex matrices.
pub mod num_traits_lite {
    use std::ops::{Add, Mul};
    pub trait Field: Clone + Add<Output = Self> + Mul<Output = Self> {
        fn zero() -> Self;
        fn from_f64(x: f64) -> Self;
    }
    impl Field for f64 {
        fn zero() -> Self {
            0.0
        }
        fn from_f64(x: f64) -> Self {
            x
        }
    }
    impl Field for crate::C64 {
        fn zero() -> Self {
            crate::C64::new(0.0, 0.0)
        }
        fn from_f64(x: f64) -> Self {
            crate::C64::new(x, 0.0)
        }
    }
}

/// The 4x4 generator H of (psi, phi)' = H (psi, phi) built from X^{ij} and f:
/// psi' = -(i/2)(Xsym - Tr X) psi - f x psi - (phi/2) kappa, phi' = kappa . psi / 2.
pub fn fuzzy_hamiltonian(xm: &nalgebra::Matrix3<C64>, f: &Vector3<C64>) -> CMat {
    let kap = fuzzy_kappa_vector(xm);
    let tr = xm.trace();
    let mut h = CMat::zeros(4, 4);
    let half_i = C64::new(0.0, 0.5);
    for a in 0..3 {
        for b in 0..3 {
            let sym = (xm[(a, b)] + xm[(b, a)]) * 0.5;
            let mut v = -half_i * sym;
            if a == b {
                v += half_i * tr;
            }
            // -(f x psi)_a = -eps_acb f_c psi_b
            for c in 0..3 {
                v -= f[c] * levi_civita(a, c, b);
            }
            h[(a, b)] = v;
        }
        h[(a, 3)] = -kap[a] * 0.5;
        h[(3, a)] = kap[a] * 0.5;
    }
    h
}

/// Closed-form H on the five-parameter family.
pub fn fuzzy_hamiltonian_family(p: &FuzzyN2Family, f: &Vector3<f64>) -> CMat {
    let FuzzyN2Family {
        x11,
        x12,
        x13,
        x21,
        x31,
    } = *p;
    let k = p.kappa();
    let i = I;
    let h = [
        [
            i * ((x12 * x21 + x13 * x31) / x11),
            -i * ((x12 + x21) / 2.0) + 2.0 * f[2],
            -i * ((x13 + x31) / 2.0) - 2.0 * f[1],
            re(-k[0]),
        ],
        [
            -i * ((x12 + x21) / 2.0) - 2.0 * f[2],
            i * ((x11 * x11 + x13 * x31) / x11),
            -i * ((x12 * x31 + x13 * x21) / (2.0 * x11)) + 2.0 * f[0],
            re(-k[1]),
        ],
        [
            -i * ((x13 + x31) / 2.0) + 2.0 * f[1],
            -i * ((x12 * x31 + x13 * x21) / (2.0 * x11)) - 2.0 * f[0],
            i * ((x11 * x11 + x12 * x21) / x11),
            re(-k[2]),
        ],
        [re(k[0]), re(k[1]), re(k[2]), re(0.0)],
    ];
    CMat::from_fn(4, 4, |a, b| h[a][b] * 0.5)
}

/// Amplitude flow through the Hamiltonian H acting on (psi, phi).
pub fn fuzzy_amplitude_hamiltonian(_model: &GeodesicModel, e: &Elem, x: &VectorField) -> Elem {
    let (xm, f) = fuzzy_field_parts(x);
    let h = fuzzy_hamiltonian(&xm, &f);
    let v = fuzzy_amplitude_coords(e);
    let w = &h * crate::linalg::CVec::from_column_slice(&v);
    fuzzy_amplitude_from_coords([w[0], w[1], w[2], w[3]])
}

/// |phi|^2 + |psi|^2 for e = psi^i x_i + phi / 2.
fn fuzzy_phi_psi_norm(_m: &GeodesicModel, st: &FlowState) -> f64 {
    fuzzy_amplitude_coords(&st.e)
        .iter()
        .map(|z| z.norm_sqr())
        .sum()
}

/// partial_j [X^i, X^j] - (Gamma^i_{jk} - Gamma^i_{kj}) X^j X^k.
pub fn fuzzy_aux_closed(model: &GeodesicModel, x: &VectorField) -> VectorField {
    let calc = model.conn.calculus();
    let alg = calc.algebra();
    VectorField(
        (0..3)
            .map(|i| {
                let mut acc = alg.zero();
                for j in 0..3 {
                    acc += &calc.partial(j, &alg.comm(&x.0[i], &x.0[j]));
                    for k in 0..3 {
                        let c = gamma_scalar(model, i, j, k) - gamma_scalar(model, i, k, j);
                        if c.norm() != 0.0 {
                            acc.axpy(-c, &alg.mul(&x.0[j], &x.0[k]));
                        }
                    }
                }
                acc
            })
            .collect(),
    )
}

/// F(X) = (D_j X^i)(D_i X^j).
pub fn fuzzy_f_closed(model: &GeodesicModel, x: &VectorField) -> Elem {
    let alg = model.conn.calculus().algebra();
    let y = model.conn.nabla_vec(x);
    let mut acc = alg.zero();
    for i in 0..3 {
        for j in 0..3 {
            acc += &alg.mul(&y.comps[i][j], &y.comps[j][i]);
        }
    }
    acc
}

/// R(X) = eps_imn eps_nkl (D_k D_l X^i) X^m with
/// D_k C_l^i = partial_k C_l^i + Gamma^i_{kj} C_l^j - Gamma^j_{kl} C_j^i.
pub fn fuzzy_r_closed(model: &GeodesicModel, x: &VectorField) -> Elem {
    let calc = model.conn.calculus();
    let alg = calc.algebra();
    let y = model.conn.nabla_vec(x);
    let c = |l: usize, i: usize| &y.comps[i][l];
    let mut acc = alg.zero();
    for i in 0..3 {
        for m in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let w: f64 = (0..3)
                        .map(|n| levi_civita(i, m, n) * levi_civita(n, k, l))
                        .sum();
                    if w == 0.0 {
                        continue;
                    }
                    let mut d = calc.partial(k, c(l, i));
                    for j in 0..3 {
                        d.axpy(gamma_scalar(model, i, k, j), c(l, j));
                        d.axpy(-gamma_scalar(model, j, k, l), c(j, i));
                    }
                    acc.axpy(re(w), &alg.mul(&d, &x.0[m]));
                }
            }
        }
    }
    acc
}

/// The five-parameter family of linear-plus-constant fields solving the improved auxiliary
/// condition with X . kappa = 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzyN2Family {
    pub x11: f64,
    pub x12: f64,
    pub x13: f64,
    pub x21: f64,
    pub x31: f64,
}

impl FuzzyN2Family {
    pub fn new(x11: f64, x12: f64, x13: f64, x21: f64, x31: f64) -> Result<Self> {
        if x11 == 0.0 || !x11.is_finite() {
            return Err(Error::Invalid("the family needs x11 != 0".into()));
        }
        Ok(FuzzyN2Family {
            x11,
            x12,
            x13,
            x21,
            x31,
        })
    }

    /// Draws parameters uniformly from [-1, 1] with |x11| >= 0.2.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x11: f64 = 0.0;
        while x11.abs() < 0.2 {
            x11 = rng.gen_range(-1.0..1.0);
        }
        let mut next = || rng.gen_range(-1.0..1.0);
        FuzzyN2Family {
            x11,
            x12: next(),
            x13: next(),
            x21: next(),
            x31: next(),
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let FuzzyN2Family {
            x11,
            x12,
            x13,
            x21,
            x31,
        } = *self;
        Matrix3::new(
            x11,
            x12,
            x13,
            x21,
            x12 * x21 / x11,
            x13 * x21 / x11,
            x31,
            x12 * x31 / x11,
            x13 * x31 / x11,
        )
    }

    /// Closed-form kappa vector of the family.
    pub fn kappa(&self) -> Vector3<f64> {
        let FuzzyN2Family {
            x11,
            x12,
            x13,
            x21,
            x31,
        } = *self;
        Vector3::new((x13 * x21 - x12 * x31) / x11, x31 - x13, x12 - x21) * 0.5
    }
}

/// Left side minus right side of (Tr(X) X - X^2)^{ij} = eps_ikl X^{km} X^{ln} eps_mnj.
pub fn fuzzy_matrix_aux_residual(xm: &Matrix3<f64>) -> f64 {
    let lhs = xm * xm.trace() - xm * xm;
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let mut r = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    for m in 0..3 {
                        for n in 0..3 {
                            r += levi_civita(i, k, l)
                                * xm[(k, m)]
                                * xm[(l, n)]
                                * levi_civita(m, n, j);
                        }
                    }
                }
            }
            worst = worst.max((lhs[(i, j)] - r).abs());
        }
    }
    worst
}

// ---------------------------------------------------------------------------------------------
// constant fields on the fuzzy sphere

/// The real constant-field subsystem X^1' = -mu1 X^2 X^3 (cyclic) with the rotation flow
/// psi' = -X x psi.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FuzzyConst {
    pub mu: [f64; 3],
    /// Diagonal metric, normalized so that its smallest entry has magnitude one.
    pub metric: [f64; 3],
}

impl FuzzyConst {
    /// From mu1, mu2 with mu3 fixed by sum mu + mu1 mu2 mu3 = 0; metric diag(1+mu2, 1-mu1, 1+mu1 mu2).
    pub fn from_mu(mu1: f64, mu2: f64) -> Result<Self> {
        if !mu1.is_finite() || !mu2.is_finite() {
            return Err(Error::Invalid("mu values must be finite".into()));
        }
        let mu3 = oracles::mu3_from(mu1, mu2)?;
        let g = [1.0 + mu2, 1.0 - mu1, 1.0 + mu1 * mu2];
        let scale = g.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        if scale == 0.0 {
            return Err(Error::Invalid(
                "metric from these mu values is degenerate".into(),
            ));
        }
        Ok(FuzzyConst {
            mu: [mu1, mu2, mu3],
            metric: g.map(|v| v / scale),
        })
    }

    /// From metric eigenvalues with mu1 = (l2 - l3) / l1 and cyclic.
    pub fn from_lambda(l: [f64; 3]) -> Result<Self> {
        if l.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Invalid("metric eigenvalues must be positive".into()));
        }
        let mu = [
            (l[1] - l[2]) / l[0],
            (l[2] - l[0]) / l[1],
            (l[0] - l[1]) / l[2],
        ];
        let scale = l.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(FuzzyConst {
            mu,
            metric: l.map(|v| v / scale),
        })
    }

    /// Whether the metric is positive: mu1 < 1, mu2 > -1, mu1 mu2 > -1.
    pub fn is_positive(&self) -> bool {
        self.mu[0] < 1.0 && self.mu[1] > -1.0 && self.mu[0] * self.mu[1] > -1.0
    }

    pub fn velocity(&self, x: [f64; 3]) -> [f64; 3] {
        let [m1, m2, m3] = self.mu;
        [-m1 * x[1] * x[2], -m2 * x[2] * x[0], -m3 * x[0] * x[1]]
    }

    pub fn speed(&self, x: &[C64]) -> f64 {
        (0..3).map(|i| self.metric[i] * x[i].norm_sqr()).sum()
    }

    /// Elliptic closed form for parameters c1, c2.
    pub fn closed_form(&self, c1: f64, c2: f64, t: f64) -> Result<[C64; 3]> {
        oracles::fuzzy_elliptic(self.mu[0], self.mu[1], c1, c2, t)
    }

    /// Initial state (X(0) from the closed form, psi(0) = (1, 0, 0)).
    pub fn initial(&self, c1: f64, c2: f64) -> Result<Vec<C64>> {
        let x0 = self.closed_form(c1, c2, 0.0)?;
        let mut y = x0.to_vec();
        y.extend([re(1.0), re(0.0), re(0.0)]);
        Ok(y)
    }
}

impl OdeSystem for FuzzyConst {
    fn rhs(&self, _t: f64, y: &[C64]) -> Vec<C64> {
        let [m1, m2, m3] = self.mu;
        let x = &y[0..3];
        let p = &y[3..6];
        // psi^k' = -eps_kij X^i psi^j
        let cross = |k: usize| {
            let mut acc = re(0.0);
            for i in 0..3 {
                for j in 0..3 {
                    let e = levi_civita(k, i, j);
                    if e != 0.0 {
                        acc -= x[i] * p[j] * e;
                    }
                }
            }
            acc
        };
        vec![
            -x[1] * x[2] * m1,
            -x[2] * x[0] * m2,
            -x[0] * x[1] * m3,
            cross(0),
            cross(1),
            cross(2),
        ]
    }

    fn columns(&self) -> Vec<String> {
        ["X1", "X2", "X3", "psi1", "psi2", "psi3"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn monitors(&self) -> Vec<Monitor> {
        vec![
            Monitor::conserved("speed", 1e-8),
            Monitor::conserved("psi_norm", tolerance::CONSERVATION),
        ]
    }

    fn monitor_values(&self, _t: f64, y: &[C64]) -> Vec<f64> {
        vec![
            self.speed(&y[0..3]),
            y[3..6].iter().map(|z| z.norm_sqr()).sum(),
        ]
    }
}

// ---------------------------------------------------------------------------------------------
// sample fields and the per-model suite

/// A vector field with coordinates uniform in the unit square of the complex plane.
pub fn random_field<R: Rng>(model: &GeodesicModel, rng: &mut R) -> VectorField {
    let n = model.dim();
    VectorField(
        (0..model.nforms())
            .map(|_| {
                Elem(
                    (0..n)
                        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect(),
                )
            })
            .collect(),
    )
}

pub fn random_elem<R: Rng>(n: usize, rng: &mut R) -> Elem {
    Elem(
        (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect(),
    )
}

/// A random real field, (X + X*)/2.
pub fn random_real_field<R: Rng>(model: &GeodesicModel, rng: &mut R) -> Result<VectorField> {
    model.conn.real_part(&random_field(model, rng))
}

/// A random real field satisfying the improved auxiliary condition, from the model's known
/// solution family (M_2: the four-parameter family; reduced fuzzy: the five-parameter family).
pub fn random_aux_field<R: Rng>(model: &GeodesicModel, rng: &mut R) -> Option<VectorField> {
    match model.name.as_str() {
        // the family solves the condition only at rho = i
        "m2" if (model.param("rho") - I).norm() < 1e-12 => Some(m2_family_field([
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ])),
        "fuzzy_n2" => {
            let fam = FuzzyN2Family::random(rng.gen());
            let f = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            Some(fuzzy_field(&fam.matrix(), &f))
        }
        _ => None,
    }
}

/// Runs the structural and randomized invariant checks of a model.
pub fn model_suite(model: &GeodesicModel, samples: usize, seed: u64) -> Report {
    let mut rep = Report::new();
    let conn = &model.conn;
    let calc = conn.calculus();
    let alg = calc.algebra();
    rep.extend("algebra.", alg.axioms_report());
    rep.extend("calculus.", calc.checks());
    rep.extend("state.", state_checks(alg, &model.state));
    rep.extend("connection.", conn.checks(&model.state));
    rep.at_most(
        "connection.metric_compat",
        conn.metric_compat_residual(&model.metric)
            .unwrap_or(f64::NAN),
        tolerance::IDENTITY,
    );
    if calc.grassmann().is_some() {
        let t = conn.torsion_direct().map(|t| max3(&t)).unwrap_or(f64::NAN);
        rep.at_most("connection.torsion", t, tolerance::IDENTITY);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = [0.0f64; 13];
    let names = [
        "star_antilinear_module",
        "star_div",
        "star_involution",
        "real_div",
        "f_twisted_hermitian",
        "r_twisted_hermitian",
        "f_closed_form",
        "r_closed_form",
        "velocity_override",
        "amplitude_override",
        "convective_reality",
        "divergence_identity",
        "aux_family",
    ];
    let ok = conn.braiding_hat().is_ok();
    for _ in 0..samples {
        let x = random_field(model, &mut rng);
        let a = random_elem(alg.dim(), &mut rng);
        if ok {
            let xs = conn.star_vec(&x).expect("hat braiding");
            // (aX)* = X* a*
            let ax = VectorField(x.0.iter().map(|c| alg.mul(&a, c)).collect());
            let lhs = conn.star_vec(&ax).expect("hat braiding");
            let rhs = VectorField(xs.0.iter().map(|c| alg.mul(c, &alg.star(&a))).collect());
            w[0] = w[0].max(lhs.dist(&rhs));
            w[1] = w[1].max(
                conn.div_geometric(&xs)
                    .dist(&alg.star(&conn.div_geometric(&x))),
            );
            w[2] = w[2].max(conn.star_vec(&xs).expect("hat braiding").dist(&x));
            let xr = conn.real_part(&x).expect("hat braiding");
            let dv = conn.div_geometric(&xr);
            w[3] = w[3].max(alg.star(&dv).dist(&model.state.twist(&dv)));
            let f = conn.f_kinetic(&xr);
            w[4] = w[4].max(alg.star(&f).dist(&model.state.twist(&f)) / (1.0 + f.max_abs()));
            // R(X) is twisted-hermitian once X also obeys the auxiliary condition
            if let Some(xa) = random_aux_field(model, &mut rng) {
                let r = conn.r_quadratic(&xa);
                w[5] = w[5].max(alg.star(&r).dist(&model.state.twist(&r)) / (1.0 + r.max_abs()));
                w[12] = w[12].max(
                    model
                        .aux_improved(&xa)
                        .map(|v| v.max_abs())
                        .unwrap_or(f64::NAN),
                );
                w[3] = w[3].max(conn.reality_residual(&model.state, &xa).unwrap_or(f64::NAN));
            }
            // a twisted-hermitian with a_dot twisted-hermitian
            let h = (&a + &alg.star(&a)).scale(re(0.5));
            let hd = alg.mul(&h, &h);
            let dd = conn
                .convective_derivative(&hd, &h, &xr)
                .expect("hat braiding");
            w[10] = w[10].max(alg.star(&dd).dist(&model.state.twist(&dd)));
        }
        if let Some(fc) = model.f_closed {
            let f = conn.f_kinetic(&x);
            w[6] = w[6].max(f.dist(&fc(model, &x)) / (1.0 + f.max_abs()));
        }
        if let Some(rc) = model.r_closed {
            let r = conn.r_quadratic(&x);
            w[7] = w[7].max(r.dist(&rc(model, &x)) / (1.0 + r.max_abs()));
        }
        if let Some(v) = model.velocity_override {
            w[8] = w[8].max(v(model, &x).dist(&model.velocity_generic(&x)));
        }
        if model.name == "m2" {
            if let Some(am) = model.amplitude_override {
                let e = random_elem(alg.dim(), &mut rng);
                w[9] = w[9].max(am(model, &e, &x).dist(&model.amplitude_generic(&e, &x)));
            }
        }
        w[11] = w[11].max(model.divergence_identity(&x).norm());
    }
    for (name, v) in names.iter().zip(w) {
        rep.at_most(format!("fields.{name}"), v, tolerance::DERIVED);
    }
    rep
}

fn max3(t: &[Vec<Vec<Elem>>]) -> f64 {
    t.iter()
        .flatten()
        .flatten()
        .map(Elem::max_abs)
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------------------------
// user models

/// JSON description of a user model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CustomModel {
    pub name: String,
    pub calculus: CalculusSpec,
    /// gamma[a][b][c] = coordinates of Gamma^a_{bc}.
    pub gamma: Vec<Vec<Vec<Vec<Pair>>>>,
    /// sigma[p][q][r][s] = sigma^{pq}_{rs}.
    pub sigma: Vec<Vec<Vec<Vec<Pair>>>>,
    pub state: Vec<Pair>,
    #[serde(default)]
    pub twist: Option<Vec<Vec<Pair>>>,
    pub metric: Vec<Vec<Pair>>,
    /// Initial velocity components, one coordinate list per basis form.
    pub initial_x: Vec<Vec<Pair>>,
    pub initial_e: Vec<Pair>,
}

pub fn build_from_spec(spec: &CustomModel) -> Result<(GeodesicModel, VectorField, Elem)> {
    let calc = Arc::new(Calculus::from_spec(&spec.calculus)?);
    let m = calc.nforms();
    let n = calc.dim();
    check_dim(m, spec.gamma.len())?;
    let mut gamma = Vec::with_capacity(m * m * m);
    for ga in &spec.gamma {
        check_dim(m, ga.len())?;
        for gab in ga {
            check_dim(m, gab.len())?;
            for gabc in gab {
                check_dim(n, gabc.len())?;
                gamma.push(Elem(pairs_to_vec(gabc)));
            }
        }
    }
    check_dim(m, spec.sigma.len())?;
    let mut sigma = Vec::with_capacity(m * m * m * m);
    for sp in &spec.sigma {
        check_dim(m, sp.len())?;
        for spq in sp {
            check_dim(m, spq.len())?;
            for spqr in spq {
                check_dim(m, spqr.len())?;
                sigma.extend(spqr.iter().map(from_pair));
            }
        }
    }
    let conn = Connection::new(calc, gamma, sigma)?;
    check_dim(n, spec.state.len())?;
    let state = match &spec.twist {
        Some(t) => StateFunctional::new(
            pairs_to_vec(&spec.state),
            pairs_to_mat(t, n, n)
                .ok_or_else(|| Error::Invalid("twist must be dim x dim".into()))?,
        )?,
        None => StateFunctional::untwisted(pairs_to_vec(&spec.state)),
    };
    let metric = pairs_to_mat(&spec.metric, m, m)
        .ok_or_else(|| Error::Invalid("metric must be nforms x nforms".into()))?;
    check_dim(m, spec.initial_x.len())?;
    let x = VectorField(
        spec.initial_x
            .iter()
            .map(|c| {
                check_dim(n, c.len())?;
                Ok(Elem(pairs_to_vec(c)))
            })
            .collect::<Result<Vec<_>>>()?,
    );
    check_dim(n, spec.initial_e.len())?;
    let e = Elem(pairs_to_vec(&spec.initial_e));
    let model = GeodesicModel::new(&spec.name, conn, state, metric);
    Ok((model, x, e))
}

/// The matrix model at rho with the SHM initial field, as a user-model document.
pub fn m2_model_spec(rho: C64, p: [f64; 4]) -> Result<CustomModel> {
    let model = build_m2(rho)?;
    let conn = &model.conn;
    let calc = conn.calculus();
    let pairs = |e: &Elem| crate::encoding::vec_to_pairs(&e.0);
    let x = m2_family_field(p);
    Ok(CustomModel {
        name: "m2_json".into(),
        calculus: CalculusSpec {
            algebra: calc.algebra().to_spec(),
            form_labels: calc.labels().to_vec(),
            partials: (0..2)
                .map(|a| crate::encoding::mat_to_pairs(calc.partial_matrix(a)))
                .collect(),
            form_star: crate::encoding::mat_to_pairs(calc.form_star()),
            central_basis: true,
        },
        gamma: (0..2)
            .map(|a| {
                (0..2)
                    .map(|b| (0..2).map(|c| pairs(conn.gamma(a, b, c))).collect())
                    .collect()
            })
            .collect(),
        sigma: (0..2)
            .map(|p| {
                (0..2)
                    .map(|q| {
                        (0..2)
                            .map(|r| {
                                (0..2)
                                    .map(|s| crate::encoding::to_pair(conn.sigma(p, q, r, s)))
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect(),
        state: crate::encoding::vec_to_pairs(model.state.coeffs()),
        twist: None,
        metric: crate::encoding::mat_to_pairs(&model.metric),
        initial_x: x.0.iter().map(pairs).collect(),
        initial_e: pairs(&alg_one(4)),
    })
}

fn alg_one(n: usize) -> Elem {
    let k = (n as f64).sqrt() as usize;
    matrix_to_elem(&linalg::identity(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fuzzy_round() -> GeodesicModel {
        build_fuzzy_n2(&Matrix3::identity()).unwrap()
    }

    #[test]
    fn m2_rejects_real_and_zero_rho() {
        assert!(build_m2(re(1.0)).is_err());
        assert!(build_m2(C64::new(0.5, 1.0)).is_err());
        assert!(build_m2(re(0.0)).is_err());
        assert!(build_m2(I).is_ok());
    }

    #[test]
    fn fuzzy_generators_obey_pauli_relations() {
        let alg = Algebra::matrix(2);
        for i in 0..3 {
            for j in 0..3 {
                let lhs = alg.mul(&fuzzy_generator(i), &fuzzy_generator(j));
                let mut rhs = alg.scalar(re(if i == j { 0.25 } else { 0.0 }));
                for k in 0..3 {
                    rhs.axpy(
                        C64::new(0.0, 0.5 * levi_civita(i, j, k)),
                        &fuzzy_generator(k),
                    );
                }
                assert!(lhs.approx_eq(&rhs, 1e-15));
            }
        }
    }

    #[test]
    fn fuzzy_partials_rotate_generators() {
        // partial_1 x_2 = x_3 and eps_ijk partial_i partial_j = partial_k
        let calc = fuzzy_calculus();
        assert!(calc
            .partial(0, &fuzzy_generator(1))
            .approx_eq(&fuzzy_generator(2), 1e-15));
        let coeffs: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|k| {
                (0..3)
                    .map(|i| (0..3).map(|j| levi_civita(i, j, k)).collect())
                    .collect()
            })
            .collect();
        assert!(calc.structure_residual(&coeffs) < 1e-12);
    }

    #[test]
    fn fuzzy_basis_forms_self_adjoint() {
        let calc = fuzzy_calculus();
        let alg = calc.algebra();
        for i in 0..3 {
            let mut xi = crate::calculus::OneForm::zeros(3, 4);
            xi.0[i] = alg.one();
            assert!(calc.star_form(&xi).dist(&xi) < 1e-15);
        }
    }

    #[test]
    fn metric_from_mu_preset() {
        let fc = FuzzyConst::from_mu(-0.5, 1.0).unwrap();
        assert_eq!(fc.mu, [-0.5, 1.0, -1.0]);
        assert_eq!(fc.metric, [4.0, 3.0, 1.0]);
        assert!(fc.is_positive());
    }

    #[test]
    fn mu_identity_for_lambdas() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let l = [
                rng.gen_range(0.1..5.0),
                rng.gen_range(0.1..5.0),
                rng.gen_range(0.1..5.0),
            ];
            let fc = FuzzyConst::from_lambda(l).unwrap();
            let [a, b, c] = fc.mu;
            assert!((a + b + c + a * b * c).abs() < 1e-12);
        }
    }

    #[test]
    fn family_has_vanishing_matrix_aux_and_x_kappa() {
        for seed in 0..10 {
            let p = FuzzyN2Family::random(seed);
            let xm = p.matrix();
            assert!(fuzzy_matrix_aux_residual(&xm) < 1e-12);
            let k = fuzzy_kappa_vector(&xm);
            assert!((k - p.kappa()).abs().max() < 1e-14);
            assert!((xm * k).abs().max() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_matches_closed_form_on_family() {
        for seed in 0..5 {
            let p = FuzzyN2Family::random(seed);
            let f = Vector3::new(0.3, -0.2, 1.0);
            let xm = p.matrix().map(re);
            let h = fuzzy_hamiltonian(&xm, &f.map(re));
            let hp = fuzzy_hamiltonian_family(&p, &f);
            assert!(linalg::max_abs(&(h.clone() - hp)) < 1e-13);
            // anti-hermitian generator
            assert!(linalg::max_abs(&(h.clone() + h.adjoint())) < 1e-14);
        }
    }

    #[test]
    fn hamiltonian_is_conjugate_of_generic_ordering() {
        let p = FuzzyN2Family::random(11);
        let f = Vector3::new(0.0, 0.0, 1.0);
        let model = fuzzy_round();
        let x = fuzzy_field(&p.matrix(), &f);
        let basis: Vec<[C64; 4]> = (0..4)
            .map(|k| {
                let mut v = [re(0.0); 4];
                v[k] = re(1.0);
                v
            })
            .collect();
        let lin = CMat::from_fn(4, 4, |i, k| {
            let e = fuzzy_amplitude_from_coords(basis[k]);
            fuzzy_amplitude_coords(&model.amplitude_generic(&e, &x))[i]
        });
        let h = fuzzy_hamiltonian(&p.matrix().map(re), &f.map(re));
        assert!(linalg::max_abs(&(lin.map(|z| z.conj()) - h)) < 1e-13);
    }

    #[test]
    fn amplitude_coords_round_trip() {
        let v = [C64::new(1.0, 2.0), re(-0.5), C64::new(0.0, 0.3), re(0.7)];
        let back = fuzzy_amplitude_coords(&fuzzy_amplitude_from_coords(v));
        for i in 0..4 {
            assert!((back[i] - v[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn field_parts_round_trip() {
        let xm = Matrix3::new(1.0, 2.0, 3.0, -1.0, 0.5, 0.25, 0.0, 4.0, -2.0);
        let f = Vector3::new(0.1, 0.2, 0.3);
        let (xm2, f2) = fuzzy_field_parts(&fuzzy_field(&xm, &f));
        assert!((xm2.map(|z| z.re) - xm).abs().max() < 1e-15);
        assert!((f2.map(|z| z.re) - f).abs().max() < 1e-15);
    }

    #[test]
    fn model_spec_round_trip() {
        let spec = m2_model_spec(I, [1.0, 0.0, 1.0, 1.0]).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: CustomModel = serde_json::from_str(&json).unwrap();
        let (model, x, _) = build_from_spec(&back).unwrap();
        let reference = build_m2(I).unwrap();
        let v1 = model.velocity_generic(&x);
        let v2 = reference.velocity_generic(&x);
        assert!(v1.dist(&v2) < 1e-15);
    }
}
