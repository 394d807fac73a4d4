use nalgebra::{Matrix3, Vector3};
use qgeo::algebra::{elem_to_matrix, matrix_to_elem};
use qgeo::calculus::VectorField;
use qgeo::flows::{integrate, oracles, GeodesicFlow, GeodesicModel, StepConfig};
use qgeo::linalg;
use qgeo::models::{
    build_fuzzy_n2, build_fuzzy_n2_with, build_m2, fuzzy_amplitude_from_coords, fuzzy_field,
    fuzzy_field_parts, m2_kappa_closed, m2_real_field, AmplitudeForm, FuzzyConst, FuzzyN2Family,
};
use qgeo::{C64, I};
use std::f64::consts::PI;

fn shm_start(model: &GeodesicModel) -> Vec<C64> {
    let (xs, _) = oracles::m2_shm(1.0, 0.0, 1.0, 1.0, 0.0);
    GeodesicFlow::new(model).initial(&m2_real_field(&xs), &matrix_to_elem(&linalg::identity(2)))
}

fn final_error(dt: f64) -> f64 {
    let model = build_m2(I).unwrap();
    let out = integrate(
        &GeodesicFlow::new(&model),
        shm_start(&model),
        StepConfig::new(dt, 1.0),
    )
    .unwrap();
    let (x, _) = model.unpack(&out.final_state);
    let (xs, _) = oracles::m2_shm(1.0, 0.0, 1.0, 1.0, out.final_t);
    x.0[0].dist(&matrix_to_elem(&xs))
}

#[test]
fn m2_divergence_element_matches_closed_form() {
    let model = build_m2(I).unwrap();
    for k in 0..20 {
        let t = 0.37 * k as f64;
        let (xs, _) = oracles::m2_shm(1.3, -0.4, 1.0, 0.8, t);
        let kappa = model.kappa(&m2_real_field(&xs));
        let want = matrix_to_elem(&m2_kappa_closed(1.3, -0.4, 0.8, t));
        assert!(kappa.dist(&want) < 1e-12, "t = {t}");
    }
}

#[test]
fn rk4_is_fourth_order_on_shm() {
    let (e1, e2) = (final_error(0.1), final_error(0.05));
    assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
}

#[test]
fn m2_amplitude_keeps_frobenius_norm_over_long_run() {
    let model = build_m2(I).unwrap();
    let out = integrate(
        &GeodesicFlow::new(&model),
        shm_start(&model),
        StepConfig::new(1e-3, 3.0 * PI),
    )
    .unwrap();
    assert!(out.pass);
    let (_, e) = model.unpack(&out.final_state);
    let norm2: f64 = e.0.iter().map(|z| z.norm_sqr()).sum();
    assert!((norm2 - 2.0).abs() < 1e-6);
    // the convective term means e itself does not stay unitary
    let em = elem_to_matrix(&e, 2);
    assert!(linalg::max_abs(&(&em * em.adjoint() - linalg::identity(2))) > 1e-2);
}

#[test]
fn constant_scalar_field_is_stationary() {
    let model = build_fuzzy_n2(&Matrix3::identity()).unwrap();
    let x = fuzzy_field(&Matrix3::zeros(), &Vector3::new(0.3, -1.2, 0.5));
    let v = model.velocity(&x);
    assert!(v.0.iter().all(|c| c.max_abs() < 1e-14));
}

#[test]
fn fuzzy_const_initial_point() {
    let fc = FuzzyConst::from_mu(-0.5, 1.0).unwrap();
    let y = fc.initial(1.0, 1.0).unwrap();
    let want = [0.0, 1.0, 2f64.sqrt()];
    for i in 0..3 {
        assert!((y[i] - C64::new(want[i], 0.0)).norm() < 1e-15);
    }
    assert_eq!(fc.mu[2], -1.0);
    assert!(fc.is_positive());
}

#[test]
fn fuzzy_const_from_lambda_normalizes_metric() {
    let fc = FuzzyConst::from_lambda([4.0, 3.0, 1.0]).unwrap();
    assert_eq!(fc.metric, [4.0, 3.0, 1.0]);
    assert_eq!(fc.mu, [0.5, -1.0, 1.0]);
    assert!(FuzzyConst::from_lambda([1.0, -1.0, 1.0]).is_err());
}

#[test]
fn lorentzian_metric_is_flagged() {
    let g = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
    let model = build_fuzzy_n2(&g).unwrap();
    assert_eq!(model.param("lorentzian"), C64::new(1.0, 0.0));
    let round = build_fuzzy_n2(&Matrix3::identity()).unwrap();
    assert_eq!(round.param("lorentzian"), C64::new(0.0, 0.0));
}

fn fuzzy_norm_drift(form: AmplitudeForm) -> f64 {
    let model = build_fuzzy_n2_with(&Matrix3::identity(), form).unwrap();
    let fam = FuzzyN2Family::random(7);
    let flow = GeodesicFlow::new(&model);
    let e0 = fuzzy_amplitude_from_coords([
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
    ]);
    let y0 = flow.initial(
        &fuzzy_field(&fam.matrix(), &Vector3::new(0.0, 0.0, 1.0)),
        &e0,
    );
    let out = integrate(&flow, y0, StepConfig::new(1e-3, 5.0)).unwrap();
    out.drift["phi_psi_norm"]
}

#[test]
fn only_the_hamiltonian_amplitude_is_unitary() {
    assert!(fuzzy_norm_drift(AmplitudeForm::Hamiltonian) < 1e-9);
    assert!(fuzzy_norm_drift(AmplitudeForm::LeftOrdered) > 1e-3);
}

#[test]
fn generic_velocity_on_family_rotates_about_force() {
    let model = build_fuzzy_n2(&Matrix3::identity()).unwrap();
    for seed in 0..5 {
        {
            let fam = FuzzyN2Family::random(seed);
            let f = Vector3::new(0.2, -0.7, 0.4);
            let xm = fam.matrix();
            let v = model.velocity_generic(&fuzzy_field(&xm, &f));
            let (vm, vf) = fuzzy_field_parts(&v);
            // each row of X turns as X^i x f
            for i in 0..3 {
                let row = Vector3::new(xm[(i, 0)], xm[(i, 1)], xm[(i, 2)]);
                let want = row.cross(&f);
                for j in 0..3 {
                    assert!(
                        (vm[(i, j)] - C64::new(want[j], 0.0)).norm() < 1e-12,
                        "seed {seed}"
                    );
                }
                assert!(vf[i].norm() < 1e-12);
            }
        }
    }
}

#[test]
fn m2_at_other_rho_keeps_state_and_divergence_identities() {
    let model = build_m2(C64::new(0.0, 2.0)).unwrap();
    let (a, g) = model.conn.divergence_agreement(&model.state).unwrap();
    assert!(a < 1e-12 && g < 1e-12);
    let (xs, _) = oracles::m2_shm(1.0, 0.0, 1.0, 1.0, 0.0);
    let x: VectorField = m2_real_field(&xs);
    assert!(model.divergence_identity(&x).norm() < 1e-12);
}
