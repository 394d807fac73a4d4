//! Geodesic velocity and amplitude flows, auxiliary conditions, and a fixed-step RK4 integrator
//! with monitors.

use crate::algebra::{Elem, StateFunctional};
use crate::calculus::VectorField;
use crate::error::{Error, Result};
use crate::geometry::Connection;
use crate::linalg::CMat;
use crate::specfun;
use crate::tolerance;
use crate::C64;
use nalgebra::{Matrix3, Vector3};
use std::collections::BTreeMap;

pub type VelocityFn = fn(&GeodesicModel, &VectorField) -> VectorField;
pub type AuxFn = fn(&GeodesicModel, &VectorField) -> VectorField;
pub type AmplitudeFn = fn(&GeodesicModel, &Elem, &VectorField) -> Elem;
pub type MonitorFn = fn(&GeodesicModel, &FlowState) -> f64;
pub type QuadraticFn = fn(&GeodesicModel, &VectorField) -> Elem;

/// A geometry together with everything needed to run geodesic flows on it.
#[derive(Clone)]
pub struct GeodesicModel {
    pub name: String,
    pub conn: Connection,
    pub state: StateFunctional,
    /// Scalar metric coefficients in the form basis.
    pub metric: CMat,
    /// Named model parameters (for example `rho`).
    pub params: BTreeMap<String, C64>,
    pub velocity_override: Option<VelocityFn>,
    pub aux_override: Option<AuxFn>,
    pub amplitude_override: Option<AmplitudeFn>,
    /// Closed forms of the kinetic and Ricci quadratic forms, used as oracles.
    pub f_closed: Option<QuadraticFn>,
    pub r_closed: Option<QuadraticFn>,
    /// Extra conserved quantities recorded along flows.
    pub conserved: Vec<(String, MonitorFn)>,
}

/// Time, velocity field and amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub x: VectorField,
    pub e: Elem,
}

impl GeodesicModel {
    pub fn new(name: &str, conn: Connection, state: StateFunctional, metric: CMat) -> Self {
        GeodesicModel {
            name: name.to_string(),
            conn,
            state,
            metric,
            params: BTreeMap::new(),
            velocity_override: None,
            aux_override: None,
            amplitude_override: None,
            f_closed: None,
            r_closed: None,
            conserved: Vec::new(),
        }
    }

    pub fn param(&self, key: &str) -> C64 {
        self.params.get(key).copied().unwrap_or_default()
    }

    pub fn nforms(&self) -> usize {
        self.conn.nforms()
    }

    pub fn dim(&self) -> usize {
        self.conn.calculus().dim()
    }

    pub fn kappa(&self, x: &VectorField) -> Elem {
        self.conn.div_geometric(x).scale(C64::new(0.5, 0.0))
    }

    /// X^a' = [kappa, X^a] - sum_b (D_b X^a) X^b.
    pub fn velocity_generic(&self, x: &VectorField) -> VectorField {
        let alg = self.conn.calculus().algebra();
        let k = self.kappa(x);
        let y = self.conn.nabla_vec(x);
        VectorField(
            (0..self.nforms())
                .map(|a| {
                    let mut acc = alg.comm(&k, &x.0[a]);
                    for b in 0..self.nforms() {
                        acc -= &alg.mul(&y.comps[a][b], &x.0[b]);
                    }
                    acc
                })
                .collect(),
        )
    }

    pub fn velocity(&self, x: &VectorField) -> VectorField {
        match self.velocity_override {
            Some(f) => f(self, x),
            None => self.velocity_generic(x),
        }
    }

    /// e' = -sum_a (partial_a e) X^a - e kappa.
    ///
    /// For components X^a that do not commute with the derivatives of e, the ordering matters;
    /// this one keeps phi(e* e) constant whenever the velocity field is real.
    pub fn amplitude_generic(&self, e: &Elem, x: &VectorField) -> Elem {
        let calc = self.conn.calculus();
        let alg = calc.algebra();
        let mut acc = -alg.mul(e, &self.kappa(x));
        for a in 0..self.nforms() {
            acc -= &alg.mul(&calc.partial(a, e), &x.0[a]);
        }
        acc
    }

    pub fn amplitude(&self, e: &Elem, x: &VectorField) -> Elem {
        match self.amplitude_override {
            Some(f) => f(self, e, x),
            None => self.amplitude_generic(e, x),
        }
    }

    pub fn aux_old(&self, x: &VectorField) -> crate::calculus::Tensor2 {
        self.conn.aux_old_residual(x)
    }

    pub fn aux_improved(&self, x: &VectorField) -> Result<VectorField> {
        self.conn.aux_improved_residual(x)
    }

    /// The model's closed form of the improved auxiliary condition, if any.
    pub fn aux_closed(&self, x: &VectorField) -> Option<VectorField> {
        self.aux_override.map(|f| f(self, x))
    }

    /// phi(R(X) + F(X) - div(X)^2).
    pub fn divergence_identity(&self, x: &VectorField) -> C64 {
        let alg = self.conn.calculus().algebra();
        let div = self.conn.div_geometric(x);
        let v = self.conn.r_quadratic(x) + self.conn.f_kinetic(x) - alg.mul(&div, &div);
        self.state.eval(&v)
    }

    /// phi(e* e).
    pub fn amplitude_norm(&self, e: &Elem) -> f64 {
        let alg = self.conn.calculus().algebra();
        self.state.eval(&alg.mul(&alg.star(e), e)).re
    }

    pub fn pack(&self, x: &VectorField, e: &Elem) -> Vec<C64> {
        let mut y: Vec<C64> = x.0.iter().flat_map(|c| c.0.iter().copied()).collect();
        y.extend_from_slice(&e.0);
        y
    }

    pub fn unpack(&self, y: &[C64]) -> (VectorField, Elem) {
        let n = self.dim();
        let m = self.nforms();
        let x = VectorField(
            (0..m)
                .map(|a| Elem(y[a * n..(a + 1) * n].to_vec()))
                .collect(),
        );
        (x, Elem(y[m * n..(m + 1) * n].to_vec()))
    }
}

/// How a monitor is judged at the end of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MonitorKind {
    /// Max |value(t) - value(0)| must stay within the bound.
    Conserved,
    /// Max |value(t)| must stay within the bound.
    Residual,
}

#[derive(Clone, Debug)]
pub struct Monitor {
    pub name: String,
    pub kind: MonitorKind,
    pub bound: f64,
}

impl Monitor {
    pub fn conserved(name: &str, bound: f64) -> Self {
        Monitor {
            name: name.into(),
            kind: MonitorKind::Conserved,
            bound,
        }
    }

    pub fn residual(name: &str, bound: f64) -> Self {
        Monitor {
            name: name.into(),
            kind: MonitorKind::Residual,
            bound,
        }
    }
}

/// A first-order system over complex state vectors.
pub trait OdeSystem {
    fn rhs(&self, t: f64, y: &[C64]) -> Vec<C64>;
    /// Names of the state components, in order.
    fn columns(&self) -> Vec<String>;
    fn monitors(&self) -> Vec<Monitor>;
    fn monitor_values(&self, t: f64, y: &[C64]) -> Vec<f64>;
}

/// Recorded time series: state components followed by monitor values.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub columns: Vec<String>,
    pub monitor_names: Vec<String>,
    pub t: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    pub monitors: Vec<Vec<f64>>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub series: Series,
    pub steps: usize,
    /// Max drift (conserved monitors) or max magnitude (residual monitors).
    pub drift: BTreeMap<String, f64>,
    pub bounds: BTreeMap<String, f64>,
    pub pass: bool,
    /// Set when the run stopped early on a non-finite state.
    pub aborted: Option<Error>,
    pub final_t: f64,
    pub final_state: Vec<C64>,
}

#[derive(Clone, Copy, Debug)]
pub struct StepConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Record every n-th step (the first and last steps are always recorded).
    pub every: usize,
}

impl StepConfig {
    pub fn new(dt: f64, t_max: f64) -> Self {
        StepConfig {
            dt,
            t_max,
            every: 1,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }
}

fn axpy(y: &[C64], k: &[C64], s: f64) -> Vec<C64> {
    y.iter().zip(k).map(|(a, b)| a + b * s).collect()
}

/// One classical RK4 step.
pub fn rk4_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, y: &[C64], dt: f64) -> Vec<C64> {
    let k1 = sys.rhs(t, y);
    let k2 = sys.rhs(t + 0.5 * dt, &axpy(y, &k1, 0.5 * dt));
    let k3 = sys.rhs(t + 0.5 * dt, &axpy(y, &k2, 0.5 * dt));
    let k4 = sys.rhs(t + dt, &axpy(y, &k3, dt));
    y.iter()
        .enumerate()
        .map(|(i, v)| v + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
        .collect()
}

/// Fixed-step RK4 with monitors recorded on the output grid.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: Vec<C64>,
    cfg: StepConfig,
) -> Result<RunOutput> {
    if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
        return Err(Error::Invalid(format!(
            "dt must be positive, got {}",
            cfg.dt
        )));
    }
    if !(cfg.t_max > 0.0) || !cfg.t_max.is_finite() {
        return Err(Error::Invalid(format!(
            "t_max must be positive, got {}",
            cfg.t_max
        )));
    }
    let every = cfg.every.max(1);
    let monitors = sys.monitors();
    let n = cfg.steps();
    let mut series = Series {
        columns: sys.columns(),
        monitor_names: monitors.iter().map(|m| m.name.clone()).collect(),
        t: Vec::new(),
        states: Vec::new(),
        monitors: Vec::new(),
    };
    let first = sys.monitor_values(0.0, &y0);
    let mut worst = vec![0.0f64; monitors.len()];
    let record = |series: &mut Series, worst: &mut Vec<f64>, t: f64, y: &[C64]| {
        let vals = sys.monitor_values(t, y);
        for (i, m) in monitors.iter().enumerate() {
            let v = match m.kind {
                MonitorKind::Conserved => (vals[i] - first[i]).abs(),
                MonitorKind::Residual => vals[i].abs(),
            };
            // NaN poisons the verdict
            worst[i] = if v.is_nan() {
                f64::NAN
            } else {
                worst[i].max(v)
            };
        }
        series.t.push(t);
        series.states.push(y.to_vec());
        series.monitors.push(vals);
    };
    record(&mut series, &mut worst, 0.0, &y0);
    let mut y = y0;
    let mut t = 0.0;
    let mut aborted = None;
    let mut done = 0;
    for k in 1..=n {
        let next = rk4_step(sys, t, &y, cfg.dt);
        let t_next = k as f64 * cfg.dt;
        if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            aborted = Some(Error::Numerical {
                t: t_next,
                reason: "non-finite state".into(),
            });
            break;
        }
        y = next;
        t = t_next;
        done = k;
        if k % every == 0 || k == n {
            record(&mut series, &mut worst, t, &y);
        }
    }
    if aborted.is_some() && series.t.last() != Some(&t) {
        record(&mut series, &mut worst, t, &y);
    }
    let mut drift = BTreeMap::new();
    let mut bounds = BTreeMap::new();
    let mut pass = aborted.is_none();
    for (m, w) in monitors.iter().zip(&worst) {
        drift.insert(m.name.clone(), *w);
        bounds.insert(m.name.clone(), m.bound);
        if !(*w <= m.bound) {
            pass = false;
        }
    }
    Ok(RunOutput {
        series,
        steps: done,
        drift,
        bounds,
        pass,
        aborted,
        final_t: t,
        final_state: y,
    })
}

/// The coupled (X, e) system of a [`GeodesicModel`].
pub struct GeodesicFlow<'a> {
    pub model: &'a GeodesicModel,
    /// Bound on the improved auxiliary residual; reality is allowed ten times this.
    pub aux_bound: f64,
}

impl<'a> GeodesicFlow<'a> {
    pub fn new(model: &'a GeodesicModel) -> Self {
        GeodesicFlow {
            model,
            aux_bound: tolerance::CONSERVATION,
        }
    }

    pub fn initial(&self, x: &VectorField, e: &Elem) -> Vec<C64> {
        self.model.pack(x, e)
    }

    pub fn state_at(&self, t: f64, y: &[C64]) -> FlowState {
        let (x, e) = self.model.unpack(y);
        FlowState { t, x, e }
    }
}

impl OdeSystem for GeodesicFlow<'_> {
    fn rhs(&self, _t: f64, y: &[C64]) -> Vec<C64> {
        let (x, e) = self.model.unpack(y);
        let xd = self.model.velocity(&x);
        let ed = self.model.amplitude(&e, &x);
        self.model.pack(&xd, &ed)
    }

    fn columns(&self) -> Vec<String> {
        let calc = self.model.conn.calculus();
        let labels = calc.algebra().labels();
        let mut cols: Vec<String> = calc
            .labels()
            .iter()
            .flat_map(|f| labels.iter().map(move |l| format!("X{f}_{l}")))
            .collect();
        cols.extend(labels.iter().map(|l| format!("e_{l}")));
        cols
    }

    fn monitors(&self) -> Vec<Monitor> {
        let mut v = vec![Monitor::conserved("norm", tolerance::CONSERVATION)];
        for (name, _) in &self.model.conserved {
            v.push(Monitor::conserved(name, tolerance::CONSERVATION));
        }
        v.push(Monitor::residual("aux", self.aux_bound));
        v.push(Monitor::residual("reality", 10.0 * self.aux_bound));
        v.push(Monitor::residual("div_identity", tolerance::CONSERVATION));
        v
    }

    fn monitor_values(&self, t: f64, y: &[C64]) -> Vec<f64> {
        let st = self.state_at(t, y);
        let m = self.model;
        let mut v = vec![m.amplitude_norm(&st.e)];
        for (_, f) in &m.conserved {
            v.push(f(m, &st));
        }
        v.push(
            m.aux_improved(&st.x)
                .map(|r| r.max_abs())
                .unwrap_or(f64::NAN),
        );
        v.push(m.conn.reality_residual(&m.state, &st.x).unwrap_or(f64::NAN));
        v.push(m.divergence_identity(&st.x).norm());
        v
    }
}

/// Closed-form trajectories used as oracles for the integrator.
pub mod oracles {
    use super::*;

    /// Parameters (a, b, c, d) of the simple harmonic family at time t.
    pub fn m2_shm_params(alpha: f64, beta: f64, gamma: f64, delta: f64, t: f64) -> [f64; 4] {
        let (s, c) = (2.0 * delta * t).sin_cos();
        [alpha * c + beta * s, beta * c - alpha * s, gamma, delta]
    }

    /// X^s for the parameters (a, b, c, d) as a 2x2 matrix; X^t = -(X^s)^dagger.
    pub fn m2_family_matrix(p: [f64; 4]) -> CMat {
        let [a, b, c, d] = p;
        let w = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        CMat::from_row_slice(
            2,
            2,
            &[w * (d - a), C64::new(c, b), C64::new(b, c), w * (d + a)],
        )
    }

    /// (X^s, X^t) on the simple harmonic geodesic at time t.
    pub fn m2_shm(alpha: f64, beta: f64, gamma: f64, delta: f64, t: f64) -> (CMat, CMat) {
        let xs = m2_family_matrix(m2_shm_params(alpha, beta, gamma, delta, t));
        let xt = -xs.adjoint();
        (xs, xt)
    }

    /// Elliptic solution of the constant-field fuzzy geodesic equations.
    ///
    /// Components are complex in general; for admissible parameters they are real.
    pub fn fuzzy_elliptic(mu1: f64, mu2: f64, c1: f64, c2: f64, t: f64) -> Result<[C64; 3]> {
        let mu3 = mu3_from(mu1, mu2)?;
        let mu = -mu1 * mu2 * mu3 * c1 * c1 / (c2 * c2);
        if mu == 0.0 || !mu.is_finite() {
            return Err(Error::Invalid(
                "ellipticity is zero; the metric eigenvalues must be distinct".into(),
            ));
        }
        let j = specfun::jacobi(c2 * t, mu)?;
        let sq = |x: f64| C64::new(x, 0.0).sqrt();
        let x1 = -crate::I * c1 * sq(mu1) * j.sn;
        let x2 = c1 * sq(mu2) * j.cn;
        let x3 = c1 * (C64::new(mu3, 0.0) / mu).sqrt() * sq(1.0 - mu * j.sn * j.sn);
        Ok([x1, x2, x3])
    }

    /// The third coefficient fixed by mu1 + mu2 + mu3 + mu1 mu2 mu3 = 0.
    pub fn mu3_from(mu1: f64, mu2: f64) -> Result<f64> {
        let den = 1.0 + mu1 * mu2;
        if den == 0.0 {
            return Err(Error::Invalid("mu1 * mu2 = -1 admits no metric".into()));
        }
        Ok(-(mu1 + mu2) / den)
    }

    /// Rows of X rotate under X' = X x f: each row r obeys r' = r x f.
    pub fn fuzzyn2_rotation(x0: &Matrix3<f64>, f: &Vector3<f64>, t: f64) -> Matrix3<f64> {
        let w = f.norm();
        if w == 0.0 {
            return *x0;
        }
        let n = f / w;
        let (s, c) = (w * t).sin_cos();
        let mut out = Matrix3::zeros();
        for i in 0..3 {
            let r: Vector3<f64> = x0.row(i).transpose();
            let par = n * n.dot(&r);
            let rot = par + (r - par) * c - n.cross(&r) * s;
            out.set_row(i, &rot.transpose());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::oracles::*;
    use super::*;

    struct Harmonic;

    impl OdeSystem for Harmonic {
        fn rhs(&self, _t: f64, y: &[C64]) -> Vec<C64> {
            vec![y[1], -y[0]]
        }
        fn columns(&self) -> Vec<String> {
            vec!["q".into(), "p".into()]
        }
        fn monitors(&self) -> Vec<Monitor> {
            vec![Monitor::conserved("energy", 1e-9)]
        }
        fn monitor_values(&self, _t: f64, y: &[C64]) -> Vec<f64> {
            vec![(y[0].norm_sqr() + y[1].norm_sqr()) / 2.0]
        }
    }

    #[test]
    fn rk4_harmonic_oscillator() {
        let y0 = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let out = integrate(&Harmonic, y0, StepConfig::new(1e-3, 1.0)).unwrap();
        assert_eq!(out.steps, 1000);
        assert!((out.final_t - 1.0).abs() < 1e-15);
        assert!((out.final_state[0].re - 1f64.cos()).abs() < 1e-12);
        assert!(out.pass);
        assert_eq!(out.series.t.len(), 1001);
    }

    #[test]
    fn rk4_fourth_order() {
        let err = |dt: f64| {
            let y0 = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
            let out = integrate(&Harmonic, y0, StepConfig::new(dt, 2.0)).unwrap();
            (out.final_state[0].re - 2f64.cos()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn bad_steps_rejected() {
        let y0 = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        assert!(integrate(&Harmonic, y0.clone(), StepConfig::new(0.0, 1.0)).is_err());
        assert!(integrate(&Harmonic, y0, StepConfig::new(0.1, -1.0)).is_err());
    }

    struct Blowup;

    impl OdeSystem for Blowup {
        fn rhs(&self, _t: f64, y: &[C64]) -> Vec<C64> {
            vec![y[0] * y[0]]
        }
        fn columns(&self) -> Vec<String> {
            vec!["y".into()]
        }
        fn monitors(&self) -> Vec<Monitor> {
            vec![]
        }
        fn monitor_values(&self, _t: f64, _y: &[C64]) -> Vec<f64> {
            vec![]
        }
    }

    #[test]
    fn blowup_aborts_with_last_good_state() {
        let out = integrate(
            &Blowup,
            vec![C64::new(1.0, 0.0)],
            StepConfig::new(0.01, 2.0),
        )
        .unwrap();
        assert!(matches!(out.aborted, Some(Error::Numerical { .. })));
        assert!(!out.pass);
        assert!(out.final_state[0].re.is_finite());
        assert!(out.final_t < 2.0);
        assert_eq!(out.series.t.last(), Some(&out.final_t));
    }

    #[test]
    fn shm_initial_values() {
        assert_eq!(
            m2_shm_params(0.3, -1.2, 0.7, 2.0, 0.0),
            [0.3, -1.2, 0.7, 2.0]
        );
    }

    #[test]
    fn elliptic_preset_initial_value() {
        let x = fuzzy_elliptic(-0.5, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((x[0] - C64::new(0.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((x[2] - C64::new(2f64.sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn elliptic_preset_matches_explicit_form() {
        for t in [0.3, 1.1, 2.9, 5.0] {
            let x = fuzzy_elliptic(-0.5, 1.0, 1.0, 1.0, t).unwrap();
            let j = specfun::jacobi(t, -0.5).unwrap();
            assert!((x[0] - C64::new(j.sn / 2f64.sqrt(), 0.0)).norm() < 1e-14);
            assert!((x[1] - C64::new(j.cn, 0.0)).norm() < 1e-14);
            assert!((x[2] - C64::new((2.0 + j.sn * j.sn).sqrt(), 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_ellipticity_rejected() {
        assert!(fuzzy_elliptic(0.0, 1.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn rotation_about_z() {
        let x0 = Matrix3::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0);
        let t = 0.7;
        let x = fuzzyn2_rotation(&x0, &Vector3::z(), t);
        for i in 0..3 {
            assert!((x[(i, 0)] - (t.cos() * x0[(i, 0)] + t.sin() * x0[(i, 1)])).abs() < 1e-14);
            assert!((x[(i, 1)] - (-t.sin() * x0[(i, 0)] + t.cos() * x0[(i, 1)])).abs() < 1e-14);
            assert!((x[(i, 2)] - x0[(i, 2)]).abs() < 1e-14);
        }
    }
}
