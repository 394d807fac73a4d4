//! Finite-difference checks of the classical geodesic-flow identities on chart manifolds:
//! flat R^n and the unit 2-sphere in (theta, phi) coordinates.
//!
//! Derivatives of the given fields use a small central step. Fields that are themselves built
//! from derivatives (the time derivative of X, covariant derivatives) are differentiated again
//! with a larger outer step, optionally Richardson-extrapolated.

use crate::error::{Error, Result};
use crate::report::Report;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Polar caps excluded from the sphere chart.
pub const POLE_MARGIN: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Manifold {
    Flat(usize),
    Sphere2,
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Manifold::Flat(n) => write!(f, "flat{n}"),
            Manifold::Sphere2 => write!(f, "sphere"),
        }
    }
}

impl FromStr for Manifold {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" | "s2" => Ok(Manifold::Sphere2),
            _ => s
                .strip_prefix("flat")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|n| (1..=6).contains(n))
                .map(Manifold::Flat)
                .ok_or_else(|| {
                    Error::Invalid(format!("unknown manifold '{s}' (flat1..flat6, sphere)"))
                }),
        }
    }
}

type Tensor3 = Vec<Vec<Vec<f64>>>;

impl Manifold {
    pub fn dim(&self) -> usize {
        match self {
            Manifold::Flat(n) => *n,
            Manifold::Sphere2 => 2,
        }
    }

    /// Rejects points too close to a coordinate singularity.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite point".into()));
        }
        if let Manifold::Sphere2 = self {
            if x[0] < POLE_MARGIN || x[0] > std::f64::consts::PI - POLE_MARGIN {
                return Err(Error::Rejected(format!(
                    "theta = {} is within {POLE_MARGIN} of a pole",
                    x[0]
                )));
            }
        }
        Ok(())
    }

    pub fn metric(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut g = vec![vec![0.0; n]; n];
        for (i, row) in g.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        if let Manifold::Sphere2 = self {
            g[1][1] = x[0].sin().powi(2);
        }
        g
    }

    /// Gamma^i_{jk}, index [i][j][k].
    pub fn christoffel(&self, x: &[f64]) -> Tensor3 {
        let n = self.dim();
        let mut gam = vec![vec![vec![0.0; n]; n]; n];
        if let Manifold::Sphere2 = self {
            let (s, c) = x[0].sin_cos();
            gam[0][1][1] = -s * c;
            gam[1][0][1] = c / s;
            gam[1][1][0] = c / s;
        }
        gam
    }

    /// R^i_{kpj} = delta^i_p g_kj - delta^i_j g_kp on the unit sphere, zero when flat.
    pub fn riemann(&self, x: &[f64]) -> Vec<Tensor3> {
        let n = self.dim();
        let mut r = vec![vec![vec![vec![0.0; n]; n]; n]; n];
        if let Manifold::Sphere2 = self {
            let g = self.metric(x);
            for (i, ri) in r.iter_mut().enumerate() {
                for (k, rik) in ri.iter_mut().enumerate() {
                    for (p, rikp) in rik.iter_mut().enumerate() {
                        for (j, v) in rikp.iter_mut().enumerate() {
                            *v = if i == p { g[k][j] } else { 0.0 }
                                - if i == j { g[k][p] } else { 0.0 };
                        }
                    }
                }
            }
        }
        r
    }

    /// R_{kr} = R^i_{kir}.
    pub fn ricci(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let r = self.riemann(x);
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|q| (0..n).map(|i| r[i][k][i][q]).sum())
                    .collect()
            })
            .collect()
    }

    /// A uniformly drawn chart point (theta kept away from the poles).
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Manifold::Flat(n) => (0..*n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            Manifold::Sphere2 => vec![
                rng.gen_range(POLE_MARGIN..std::f64::consts::PI - POLE_MARGIN),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ],
        }
    }
}

/// Vector fields on a chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Field {
    Zero,
    Constant(Vec<f64>),
    /// X(x) = A x + b
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    /// Gradient of cos(theta) on the sphere.
    GradCos,
    /// Each component a quadratic polynomial: c0 + sum_i c1_i x_i + sum_{i<=j} c2_ij x_i x_j.
    Quadratic {
        coeffs: Vec<Vec<f64>>,
    },
}

fn quadratic_len(n: usize) -> usize {
    1 + n + n * (n + 1) / 2
}

impl Field {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        match self {
            Field::Zero => vec![0.0; n],
            Field::Constant(v) => v.clone(),
            Field::Linear { a, b } => (0..n)
                .map(|i| b[i] + (0..n).map(|j| a[i][j] * x[j]).sum::<f64>())
                .collect(),
            Field::GradCos => vec![-x[0].sin(), 0.0],
            Field::Quadratic { coeffs } => coeffs
                .iter()
                .map(|c| {
                    let mut v = c[0];
                    let mut idx = 1;
                    for xi in x {
                        v += c[idx] * xi;
                        idx += 1;
                    }
                    for i in 0..n {
                        for j in i..n {
                            v += c[idx] * x[i] * x[j];
                            idx += 1;
                        }
                    }
                    v
                })
                .collect(),
        }
    }

    pub fn random_linear<R: Rng>(n: usize, rng: &mut R) -> Self {
        Field::Linear {
            a: (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
            b: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    pub fn random_quadratic<R: Rng>(n: usize, rng: &mut R) -> Self {
        Field::Quadratic {
            coeffs: (0..n)
                .map(|_| {
                    (0..quadratic_len(n))
                        .map(|_| rng.gen_range(-1.0..1.0))
                        .collect()
                })
                .collect(),
        }
    }

    /// Looks up a named preset for a manifold.
    pub fn preset<R: Rng>(name: &str, man: Manifold, rng: &mut R) -> Result<Self> {
        let n = man.dim();
        match name {
            "zero" => Ok(Field::Zero),
            "constant" => Ok(Field::Constant(
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )),
            "linear" => Ok(Field::random_linear(n, rng)),
            "quadratic" | "poly" => Ok(Field::random_quadratic(n, rng)),
            "gradcos" if man == Manifold::Sphere2 => Ok(Field::GradCos),
            _ => Err(Error::Invalid(format!(
                "unknown field preset '{name}' for {man}"
            ))),
        }
    }
}

/// Central-difference steps: `h` for first derivatives, `outer` for second derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdConfig {
    pub h: f64,
    pub outer: f64,
    /// Richardson-extrapolate every difference quotient (steps h and h/2).
    pub richardson: bool,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            h: 1e-5,
            outer: 1e-3,
            richardson: true,
        }
    }
}

impl FdConfig {
    /// Step h for every derivative and no extrapolation.
    pub fn plain(h: f64) -> Self {
        FdConfig {
            h,
            outer: h,
            richardson: false,
        }
    }
}

fn shifted(x: &[f64], s: usize, d: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[s] += d;
    y
}

/// Central difference of a vector function along coordinate s.
fn partial<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64], s: usize, h: f64) -> Vec<f64> {
    let p = f(&shifted(x, s, h));
    let m = f(&shifted(x, s, -h));
    p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

fn partial_fd<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64], s: usize, fd: &FdConfig) -> Vec<f64> {
    let d1 = partial(f, x, s, fd.h);
    if !fd.richardson {
        return d1;
    }
    let d2 = partial(f, x, s, fd.h / 2.0);
    d2.iter()
        .zip(&d1)
        .map(|(b, a)| (4.0 * b - a) / 3.0)
        .collect()
}

/// Second central difference d_s d_t of a vector function.
fn second<F: Fn(&[f64]) -> Vec<f64>>(f: &F, x: &[f64], s: usize, t: usize, h: f64) -> Vec<f64> {
    if s == t {
        let p = f(&shifted(x, s, h));
        let c = f(x);
        let m = f(&shifted(x, s, -h));
        return (0..c.len())
            .map(|i| (p[i] - 2.0 * c[i] + m[i]) / (h * h))
            .collect();
    }
    let at = |a: f64, b: f64| f(&shifted(&shifted(x, s, a), t, b));
    let (pp, pm, mp, mm) = (at(h, h), at(h, -h), at(-h, h), at(-h, -h));
    (0..pp.len())
        .map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h))
        .collect()
}

fn second_fd<F: Fn(&[f64]) -> Vec<f64>>(
    f: &F,
    x: &[f64],
    s: usize,
    t: usize,
    fd: &FdConfig,
) -> Vec<f64> {
    let d1 = second(f, x, s, t, fd.outer);
    if !fd.richardson {
        return d1;
    }
    let d2 = second(f, x, s, t, fd.outer / 2.0);
    d2.iter()
        .zip(&d1)
        .map(|(b, a)| (4.0 * b - a) / 3.0)
        .collect()
}

/// A value with its spatial gradient; derived quantities carry gradients by the product rule.
#[derive(Clone, Debug)]
struct Dual {
    v: f64,
    d: Vec<f64>,
}

impl Dual {
    fn zero(n: usize) -> Self {
        Dual {
            v: 0.0,
            d: vec![0.0; n],
        }
    }

    fn add(&self, o: &Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: self.d.iter().zip(&o.d).map(|(a, b)| a + b).collect(),
        }
    }

    fn mul(&self, o: &Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: self
                .d
                .iter()
                .zip(&o.d)
                .map(|(a, b)| a * o.v + self.v * b)
                .collect(),
        }
    }

    fn scale(&self, c: f64) -> Dual {
        Dual {
            v: self.v * c,
            d: self.d.iter().map(|a| a * c).collect(),
        }
    }
}

/// Field components and their first derivatives, each with a gradient.
struct Jet {
    val: Vec<Dual>,
    /// der[i][s] = d_s F^i
    der: Vec<Vec<Dual>>,
}

fn field_jet(field: &Field, x: &[f64], fd: &FdConfig) -> Jet {
    let n = x.len();
    let f = |p: &[f64]| field.eval(p);
    let v = f(x);
    let jac: Vec<Vec<f64>> = (0..n).map(|s| partial_fd(&f, x, s, fd)).collect();
    let mut hess = vec![vec![vec![0.0; n]; n]; n];
    for s in 0..n {
        for t in s..n {
            let h = second_fd(&f, x, s, t, fd);
            for i in 0..n {
                hess[i][s][t] = h[i];
                hess[i][t][s] = h[i];
            }
        }
    }
    Jet {
        val: (0..n)
            .map(|i| Dual {
                v: v[i],
                d: (0..n).map(|s| jac[s][i]).collect(),
            })
            .collect(),
        der: (0..n)
            .map(|i| {
                (0..n)
                    .map(|s| Dual {
                        v: jac[s][i],
                        d: hess[i][s].clone(),
                    })
                    .collect()
            })
            .collect(),
    }
}

/// Christoffels with gradients, [i][j][k].
fn christoffel_jet(man: Manifold, x: &[f64], fd: &FdConfig) -> Vec<Vec<Vec<Dual>>> {
    let n = x.len();
    let g = man.christoffel(x);
    let flat = |p: &[f64]| man.christoffel(p).concat().concat();
    let dg: Vec<Vec<f64>> = (0..n).map(|s| partial_fd(&flat, x, s, fd)).collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| Dual {
                            v: g[i][j][k],
                            d: (0..n).map(|s| dg[s][(i * n + j) * n + k]).collect(),
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// X^i_{;s} = d_s X^i + Gamma^i_{sk} X^k with gradients.
fn covariant(gam: &[Vec<Vec<Dual>>], jet: &Jet) -> Vec<Vec<Dual>> {
    let n = jet.val.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|s| {
                    (0..n).fold(jet.der[i][s].clone(), |acc, k| {
                        acc.add(&gam[i][s][k].mul(&jet.val[k]))
                    })
                })
                .collect()
        })
        .collect()
}

/// X_dot^i = -X^s X^i_{;s}, the geodesic velocity equation, with gradients.
fn geodesic_rate(cov: &[Vec<Dual>], jet: &Jet) -> Vec<Dual> {
    let n = jet.val.len();
    (0..n)
        .map(|i| {
            (0..n)
                .fold(Dual::zero(n), |acc, s| acc.add(&jet.val[s].mul(&cov[i][s])))
                .scale(-1.0)
        })
        .collect()
}

/// (nabla_Y V)^i at the point from the values of Y and the value and gradient of V.
fn nabla_along(gam: &[Vec<Vec<Dual>>], v: &[Dual], y: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|s| y[s] * (v[i].d[s] + (0..n).map(|k| gam[i][s][k].v * v[k].v).sum::<f64>()))
                .sum()
        })
        .collect()
}

fn values(v: &[Dual]) -> Vec<f64> {
    v.iter().map(|d| d.v).collect()
}

/// |D(div X)/Dt + X^s_{;i} X^i_{;s} + R_kr X^k X^r| at a point.
pub fn prop_div_residual(man: Manifold, field: &Field, x: &[f64], fd: &FdConfig) -> Result<f64> {
    man.check_point(x)?;
    let n = x.len();
    let jet = field_jet(field, x, fd);
    let gam = christoffel_jet(man, x, fd);
    let cov = covariant(&gam, &jet);
    let v = values(&jet.val);
    let div = (0..n).fold(Dual::zero(n), |acc, i| acc.add(&cov[i][i]));
    let rate = geodesic_rate(&cov, &jet);
    // d_t div X = div(X_dot); Christoffels are time independent
    let dt_div: f64 = (0..n)
        .map(|i| rate[i].d[i] + (0..n).map(|k| gam[i][i][k].v * rate[k].v).sum::<f64>())
        .sum();
    let conv: f64 = (0..n).map(|k| v[k] * div.d[k]).sum();
    let mut kinetic = 0.0;
    let ric = man.ricci(x);
    let mut curv = 0.0;
    for a in 0..n {
        for b in 0..n {
            kinetic += cov[a][b].v * cov[b][a].v;
            curv += ric[a][b] * v[a] * v[b];
        }
    }
    Ok((dt_div + conv + kinetic + curv).abs())
}

/// |D(g(X, X))/Dt| at a point.
pub fn speed_conservation_residual(
    man: Manifold,
    field: &Field,
    x: &[f64],
    fd: &FdConfig,
) -> Result<f64> {
    man.check_point(x)?;
    let n = x.len();
    let jet = field_jet(field, x, fd);
    let gam = christoffel_jet(man, x, fd);
    let rate = values(&geodesic_rate(&covariant(&gam, &jet), &jet));
    let g = man.metric(x);
    let flat = |p: &[f64]| man.metric(p).concat();
    let dg: Vec<Vec<f64>> = (0..n).map(|s| partial_fd(&flat, x, s, fd)).collect();
    let mut speed = Dual::zero(n);
    for i in 0..n {
        for j in 0..n {
            let gij = Dual {
                v: g[i][j],
                d: (0..n).map(|s| dg[s][i * n + j]).collect(),
            };
            speed = speed.add(&gij.mul(&jet.val[i]).mul(&jet.val[j]));
        }
    }
    let v = values(&jet.val);
    let mut dt = 0.0;
    for i in 0..n {
        for j in 0..n {
            dt += 2.0 * g[i][j] * v[i] * rate[j];
        }
    }
    let conv: f64 = (0..n).map(|k| v[k] * speed.d[k]).sum();
    Ok((dt + conv).abs())
}

/// Residual (max over components) of the convected acceleration of a velocity perturbation Y:
/// (D/Dt)(DY/Dt) = 2 nabla_{nabla_Y X} X + R^i_{kpj} Y^p X^j X^k.
pub fn deviation_residual(
    man: Manifold,
    xf: &Field,
    yf: &Field,
    x: &[f64],
    fd: &FdConfig,
) -> Result<f64> {
    man.check_point(x)?;
    let n = x.len();
    let xj = field_jet(xf, x, fd);
    let yj = field_jet(yf, x, fd);
    let gam = christoffel_jet(man, x, fd);
    let cov_x = covariant(&gam, &xj);
    let cov_y = covariant(&gam, &yj);
    let vx = values(&xj.val);
    let vy = values(&yj.val);
    // nabla_Y X with its gradient
    let nyx: Vec<Dual> = (0..n)
        .map(|i| {
            (0..n).fold(Dual::zero(n), |acc, s| {
                acc.add(&yj.val[s].mul(&cov_x[i][s]))
            })
        })
        .collect();
    let x_dot = geodesic_rate(&cov_x, &xj);
    // Y_dot = -nabla_Y X - nabla_X Y
    let y_dot: Vec<f64> = (0..n)
        .map(|i| -nyx[i].v - (0..n).map(|s| vx[s] * cov_y[i][s].v).sum::<f64>())
        .collect();
    // lhs = -nabla_{Y_dot} X - nabla_Y X_dot - nabla_X (nabla_Y X)
    let b = nabla_along(&gam, &x_dot, &vy);
    let c = nabla_along(&gam, &nyx, &vx);
    let r = man.riemann(x);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let a: f64 = (0..n).map(|s| y_dot[s] * cov_x[i][s].v).sum();
        let lhs = -a - b[i] - c[i];
        let mut rhs: f64 = (0..n).map(|s| 2.0 * nyx[s].v * cov_x[i][s].v).sum();
        for k in 0..n {
            for p in 0..n {
                for j in 0..n {
                    rhs += r[i][k][p][j] * vy[p] * vx[j] * vx[k];
                }
            }
        }
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Largest gap between the analytic Christoffels and the Levi-Civita formula applied to a
/// finite-difference derivative of the metric.
pub fn christoffel_fd_residual(man: Manifold, x: &[f64], h: f64) -> Result<f64> {
    man.check_point(x)?;
    let n = x.len();
    let g = man.metric(x);
    let ginv = invert_diag_or_general(&g);
    // dg[l][k][j] = d_j g_lk
    let flat = |p: &[f64]| man.metric(p).concat();
    let dg: Vec<Vec<f64>> = (0..n).map(|j| partial(&flat, x, j, h)).collect();
    let d = |l: usize, k: usize, j: usize| dg[j][l * n + k];
    let gam = man.christoffel(x);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v: f64 = (0..n)
                    .map(|l| 0.5 * ginv[i][l] * (d(l, k, j) + d(l, j, k) - d(j, k, l)))
                    .sum();
                worst = worst.max((v - gam[i][j][k]).abs());
            }
        }
    }
    Ok(worst)
}

fn invert_diag_or_general(g: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = g.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| g[i][j]);
    let inv = m.try_inverse().expect("chart metric is invertible");
    (0..n)
        .map(|i| (0..n).map(|j| inv[(i, j)]).collect())
        .collect()
}

/// Which identity an oracle run evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Identity {
    Divergence,
    Speed,
    Deviation,
}

impl FromStr for Identity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "div" | "divergence" => Ok(Identity::Divergence),
            "speed" => Ok(Identity::Speed),
            "deviation" => Ok(Identity::Deviation),
            _ => Err(Error::Invalid(format!(
                "unknown identity '{s}' (div, speed, deviation)"
            ))),
        }
    }
}

/// Largest residual of an identity over sampled points, with a fresh field from the preset
/// drawn per point.
pub fn sample_max(
    man: Manifold,
    preset: &str,
    which: Identity,
    points: usize,
    seed: u64,
    fd: &FdConfig,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let x = man.sample_point(&mut rng);
        let xf = Field::preset(preset, man, &mut rng)?;
        let r = match which {
            Identity::Divergence => prop_div_residual(man, &xf, &x, fd)?,
            Identity::Speed => speed_conservation_residual(man, &xf, &x, fd)?,
            Identity::Deviation => {
                let yf = Field::preset(preset, man, &mut rng)?;
                deviation_residual(man, &xf, &yf, &x, fd)?
            }
        };
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Ratio of residuals at steps h and h/2 for one configuration without extrapolation.
pub fn convergence_ratio(man: Manifold, field: &Field, x: &[f64], h: f64) -> Result<f64> {
    let coarse = prop_div_residual(man, field, x, &FdConfig::plain(h))?;
    let fine = prop_div_residual(man, field, x, &FdConfig::plain(h / 2.0))?;
    Ok(coarse / fine)
}

/// The classical identity suite.
pub fn oracle_suite(points: usize, seed: u64) -> Result<Report> {
    let fd = FdConfig::default();
    let mut rep = Report::new();
    let s2 = Manifold::Sphere2;
    let r3 = Manifold::Flat(3);
    rep.at_most(
        "div.sphere_gradcos",
        sample_max(s2, "gradcos", Identity::Divergence, points, seed, &fd)?,
        1e-5,
    );
    rep.at_most(
        "div.sphere_quadratic",
        sample_max(s2, "quadratic", Identity::Divergence, points, seed, &fd)?,
        1e-5,
    );
    rep.at_most(
        "div.flat3_linear",
        sample_max(r3, "linear", Identity::Divergence, points, seed, &fd)?,
        1e-7,
    );
    rep.at_most(
        "speed.sphere_quadratic",
        sample_max(s2, "quadratic", Identity::Speed, points, seed, &fd)?,
        1e-5,
    );
    rep.at_most(
        "speed.flat3_linear",
        sample_max(r3, "linear", Identity::Speed, points, seed, &fd)?,
        1e-7,
    );
    let dev_points = points.min(50);
    rep.at_most(
        "deviation.sphere_quadratic",
        sample_max(s2, "quadratic", Identity::Deviation, dev_points, seed, &fd)?,
        1e-4,
    );
    rep.at_most(
        "deviation.flat3_linear",
        sample_max(r3, "linear", Identity::Deviation, dev_points, seed, &fd)?,
        1e-7,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        worst = worst.max(christoffel_fd_residual(
            s2,
            &s2.sample_point(&mut rng),
            1e-5,
        )?);
    }
    rep.at_most("christoffel.sphere_fd", worst, 1e-6);
    let field = Field::random_quadratic(2, &mut ChaCha8Rng::seed_from_u64(seed));
    let ratio = convergence_ratio(s2, &field, &[1.1, 0.4], 1e-2)?;
    rep.at_most("order.h_halving_ratio_gap", (ratio - 4.0).abs(), 0.5);
    Ok(rep)
}
