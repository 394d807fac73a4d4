use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use qgeo::algebra::{Algebra, Elem, StateFunctional};
use qgeo::classical_oracle::{
    prop_div_residual, speed_conservation_residual, FdConfig, Field, Manifold,
};
use qgeo::cli::parse_complex;
use qgeo::flows::GeodesicModel;
use qgeo::models::{
    build_fuzzy_n2, build_m2, fuzzy_calculus, fuzzy_field, fuzzy_hamiltonian,
    fuzzy_hamiltonian_family, fuzzy_matrix_aux_residual, m2_calculus, m2_family_field, random_elem,
    random_field, FuzzyConst, FuzzyN2Family,
};
use qgeo::specfun::{elliptic_k, jacobi};
use qgeo::{linalg, C64, I};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn models() -> &'static [GeodesicModel] {
    static M: OnceLock<Vec<GeodesicModel>> = OnceLock::new();
    M.get_or_init(|| {
        vec![
            build_m2(I).unwrap(),
            build_m2(C64::new(0.0, 2.0)).unwrap(),
            build_fuzzy_n2(&Matrix3::identity()).unwrap(),
            build_fuzzy_n2(&Matrix3::from_diagonal(&Vector3::new(4.0, 3.0, 1.0))).unwrap(),
        ]
    })
}

fn family() -> impl Strategy<Value = FuzzyN2Family> {
    (
        prop_oneof![-1.0..-0.2f64, 0.2..1.0f64],
        -1.0..1.0f64,
        -1.0..1.0f64,
        -1.0..1.0f64,
        -1.0..1.0f64,
    )
        .prop_map(|(a, b, c, d, e)| FuzzyN2Family::new(a, b, c, d, e).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_algebra_is_associative(seed in any::<u64>(), n in 1usize..4) {
        let alg = Algebra::matrix(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (random_elem(n * n, &mut rng), random_elem(n * n, &mut rng), random_elem(n * n, &mut rng));
        let l = alg.mul(&alg.mul(&a, &b), &c);
        let r = alg.mul(&a, &alg.mul(&b, &c));
        prop_assert!(l.dist(&r) < 1e-12);
        prop_assert_eq!(alg.star(&alg.star(&a)), a);
    }

    #[test]
    fn trace_state_is_hermitian_on_products(seed in any::<u64>()) {
        let alg = Algebra::matrix(2);
        let st = StateFunctional::normalized_trace(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_elem(4, &mut rng), random_elem(4, &mut rng));
        let ab = alg.mul(&a, &b);
        prop_assert!((st.eval(&alg.star(&ab)) - st.eval(&ab).conj()).norm() < 1e-12);
    }

    #[test]
    fn shipped_calculi_obey_leibniz(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for calc in [m2_calculus(), fuzzy_calculus()] {
            let alg = calc.algebra();
            let (a, b) = (random_elem(4, &mut rng), random_elem(4, &mut rng));
            for i in 0..calc.nforms() {
                let lhs = calc.partial(i, &alg.mul(&a, &b));
                let rhs = alg.mul(&calc.partial(i, &a), &b) + alg.mul(&a, &calc.partial(i, &b));
                prop_assert!(lhs.dist(&rhs) < 1e-12);
            }
        }
    }

    #[test]
    fn star_on_fields(seed in any::<u64>(), which in 0usize..4) {
        let model = &models()[which];
        let conn = &model.conn;
        let alg = conn.calculus().algebra();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_field(model, &mut rng);
        let a = random_elem(alg.dim(), &mut rng);
        let xs = conn.star_vec(&x).unwrap();
        // X** = X and div(X*) = div(X)*
        prop_assert!(conn.star_vec(&xs).unwrap().dist(&x) < 1e-10);
        prop_assert!(conn.div_geometric(&xs).dist(&alg.star(&conn.div_geometric(&x))) < 1e-10);
        // (aX)* = X* a*
        let ax = qgeo::calculus::VectorField(x.0.iter().map(|c| alg.mul(&a, c)).collect());
        let rhs = qgeo::calculus::VectorField(xs.0.iter().map(|c| alg.mul(c, &alg.star(&a))).collect());
        prop_assert!(conn.star_vec(&ax).unwrap().dist(&rhs) < 1e-10);
        // real X has twisted-hermitian divergence and kinetic form
        let xr = conn.real_part(&x).unwrap();
        let d = conn.div_geometric(&xr);
        prop_assert!(alg.star(&d).dist(&model.state.twist(&d)) < 1e-10);
        let f = conn.f_kinetic(&xr);
        prop_assert!(alg.star(&f).dist(&model.state.twist(&f)) < 1e-10 * (1.0 + f.max_abs()));
    }

    #[test]
    fn quadratic_forms_match_closed_forms(seed in any::<u64>(), which in 0usize..4) {
        let model = &models()[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_field(model, &mut rng);
        let f = model.conn.f_kinetic(&x);
        let r = model.conn.r_quadratic(&x);
        prop_assert!(f.dist(&(model.f_closed.unwrap())(model, &x)) < 1e-10 * (1.0 + f.max_abs()));
        prop_assert!(r.dist(&(model.r_closed.unwrap())(model, &x)) < 1e-10 * (1.0 + r.max_abs()));
    }

    #[test]
    fn m2_family_is_real_with_hermitian_ricci_form(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64, d in -2.0..2.0f64) {
        let model = &models()[0];
        let x = m2_family_field([a, b, c, d]);
        let alg = model.conn.calculus().algebra();
        prop_assert!(model.conn.reality_residual(&model.state, &x).unwrap() < 1e-12);
        prop_assert!(model.aux_improved(&x).unwrap().max_abs() < 1e-10);
        prop_assert!(model.aux_closed(&x).unwrap().max_abs() < 1e-10);
        let r = model.conn.r_quadratic(&x);
        prop_assert!(alg.star(&r).dist(&model.state.twist(&r)) < 1e-10 * (1.0 + r.max_abs()));
        // the explicit velocity is the generic one
        prop_assert!(model.velocity(&x).dist(&model.velocity_generic(&x)) < 1e-10);
    }

    #[test]
    fn fuzzy_family_solves_auxiliary_condition(p in family(), f in prop::array::uniform3(-1.0..1.0f64)) {
        let f = Vector3::from(f);
        let xm = p.matrix();
        prop_assert!(fuzzy_matrix_aux_residual(&xm) < 1e-10);
        for model in &models()[2..] {
            let x = fuzzy_field(&xm, &f);
            prop_assert!(model.aux_improved(&x).unwrap().max_abs() < 1e-10);
            prop_assert!(model.aux_closed(&x).unwrap().max_abs() < 1e-10);
        }
    }

    #[test]
    fn fuzzy_hamiltonian_is_antihermitian(p in family(), f in prop::array::uniform3(-1.0..1.0f64)) {
        let f = Vector3::from(f);
        let h = fuzzy_hamiltonian(&p.matrix().map(|v| C64::new(v, 0.0)), &f.map(|v| C64::new(v, 0.0)));
        prop_assert!(linalg::max_abs(&(h.clone() + h.adjoint())) < 1e-12);
        prop_assert!(linalg::max_abs(&(h - fuzzy_hamiltonian_family(&p, &f))) < 1e-12);
    }

    #[test]
    fn mu_constraint_from_eigenvalues(l in prop::array::uniform3(0.05..10.0f64)) {
        let fc = FuzzyConst::from_lambda(l).unwrap();
        let [a, b, c] = fc.mu;
        prop_assert!((a + b + c + a * b * c).abs() < 1e-10 * (1.0 + a.abs() * b.abs() * c.abs()));
    }

    #[test]
    fn jacobi_identities(u in -10.0..10.0f64, m in -0.95..0.95f64) {
        let j = jacobi(u, m).unwrap();
        prop_assert!((j.sn * j.sn + j.cn * j.cn - 1.0).abs() < 1e-10);
        prop_assert!((j.dn * j.dn + m * j.sn * j.sn - 1.0).abs() < 1e-10);
        let p = 4.0 * elliptic_k(m).unwrap();
        prop_assert!((jacobi(u + p, m).unwrap().sn - j.sn).abs() < 1e-8);
    }

    #[test]
    fn complex_display_parses_back(re in -1e3..1e3f64, im in -1e3..1e3f64) {
        let z = C64::new(re, im);
        let text = format!("{}{:+}i", re, im);
        prop_assert_eq!(parse_complex(&text).unwrap(), z);
    }

    #[test]
    fn flat_linear_fields_satisfy_identities(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let man = Manifold::Flat(3);
        let f = Field::random_linear(3, &mut rng);
        let x = man.sample_point(&mut rng);
        let fd = FdConfig::default();
        prop_assert!(prop_div_residual(man, &f, &x, &fd).unwrap() < 1e-7);
        prop_assert!(speed_conservation_residual(man, &f, &x, &fd).unwrap() < 1e-7);
    }
}

#[test]
fn elem_coordinates_are_plain_vectors() {
    let e = Elem(vec![C64::new(1.0, 0.0); 4]);
    assert_eq!(e.dim(), 4);
}
