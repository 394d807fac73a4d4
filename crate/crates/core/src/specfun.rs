//! Jacobi elliptic functions and the complete elliptic integral of the first kind.

use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_2;

/// Sanity bound on the parameter.
pub const MAX_PARAM: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jacobi {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
}

fn check(u: f64, m: f64) -> Result<()> {
    if !u.is_finite() || !m.is_finite() {
        return Err(Error::Invalid(format!(
            "non-finite elliptic input u={u}, m={m}"
        )));
    }
    if m.abs() >= MAX_PARAM {
        return Err(Error::Invalid(format!(
            "elliptic parameter {m} out of range"
        )));
    }
    Ok(())
}

/// sn, cn, dn of real argument `u` and real parameter `m`.
pub fn jacobi(u: f64, m: f64) -> Result<Jacobi> {
    check(u, m)?;
    Ok(jacobi_unchecked(u, m))
}

fn jacobi_unchecked(u: f64, m: f64) -> Jacobi {
    if m < 0.0 {
        // reduce to a parameter in (0, 1)
        let mu = -m / (1.0 - m);
        let r = (1.0 - m).sqrt();
        let j = landen(u * r, mu);
        return Jacobi {
            sn: j.sn / (j.dn * r),
            cn: j.cn / j.dn,
            dn: 1.0 / j.dn,
        };
    }
    if m > 1.0 {
        let r = m.sqrt();
        let j = jacobi_unchecked(u * r, 1.0 / m);
        return Jacobi {
            sn: j.sn / r,
            cn: j.dn,
            dn: j.cn,
        };
    }
    if m == 1.0 {
        let s = 1.0 / u.cosh();
        return Jacobi {
            sn: u.tanh(),
            cn: s,
            dn: s,
        };
    }
    landen(u, m)
}

/// Descending Landen transformation for 0 <= m < 1.
fn landen(u: f64, m: f64) -> Jacobi {
    if m == 0.0 {
        return Jacobi {
            sn: u.sin(),
            cn: u.cos(),
            dn: 1.0,
        };
    }
    let mut a = vec![1.0];
    let mut c = vec![m.sqrt()];
    let mut b = (1.0 - m).sqrt();
    while c.last().unwrap().abs() > f64::EPSILON * 0.5 && a.len() < 40 {
        let an = *a.last().unwrap();
        let next_a = 0.5 * (an + b);
        let next_c = 0.5 * (an - b);
        b = (an * b).sqrt();
        a.push(next_a);
        c.push(next_c);
    }
    let n = a.len() - 1;
    let mut phi = 2f64.powi(n as i32) * a[n] * u;
    for k in (1..=n).rev() {
        phi = 0.5 * (phi + (c[k] / a[k] * phi.sin()).asin());
    }
    let sn = phi.sin();
    let cn = phi.cos();
    Jacobi {
        sn,
        cn,
        dn: (1.0 - m * sn * sn).sqrt(),
    }
}

/// Arithmetic-geometric mean of two positive numbers.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= f64::EPSILON * a.abs() {
            break;
        }
        let na = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = na;
    }
    0.5 * (a + b)
}

/// Complete elliptic integral K(m) for m < 1 (negative m allowed).
pub fn elliptic_k(m: f64) -> Result<f64> {
    check(0.0, m)?;
    if m >= 1.0 {
        return Err(Error::Invalid(format!(
            "K(m) diverges for m >= 1 (m = {m})"
        )));
    }
    Ok(FRAC_PI_2 / agm(1.0, (1.0 - m).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    // RK4 integration of sn' = cn dn, cn' = -sn dn, dn' = -m sn cn from u = 0.
    fn ode_oracle(u: f64, m: f64, h: f64) -> [f64; 3] {
        let f = |y: [f64; 3]| [y[1] * y[2], -y[0] * y[2], -m * y[0] * y[1]];
        let steps = (u / h).round() as usize;
        let h = u / steps as f64;
        let mut y = [0.0, 1.0, 1.0];
        let add =
            |y: [f64; 3], k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f(add(y, k1, h / 2.0));
            let k3 = f(add(y, k2, h / 2.0));
            let k4 = f(add(y, k3, h));
            for i in 0..3 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y
    }

    // midpoint-free composite Simpson quadrature of K
    fn k_quadrature(m: f64) -> f64 {
        let n = 20000;
        let h = FRAC_PI_2 / n as f64;
        let f = |t: f64| 1.0 / (1.0 - m * t.sin().powi(2)).sqrt();
        let mut s = f(0.0) + f(FRAC_PI_2);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn at_zero_argument() {
        for m in [-0.9, -0.5, 0.0, 0.3, 0.9, 1.0, 2.5] {
            let j = jacobi(0.0, m).unwrap();
            assert_eq!((j.sn, j.cn, j.dn), (0.0, 1.0, 1.0));
        }
    }

    #[test]
    fn zero_parameter_is_trigonometric() {
        for u in [-3.0, -0.4, 0.7, 5.0] {
            let j = jacobi(u, 0.0).unwrap();
            assert_eq!(j.sn, f64::sin(u));
            assert_eq!(j.cn, f64::cos(u));
            assert_eq!(j.dn, 1.0);
        }
    }

    #[test]
    fn negative_parameter_against_ode() {
        let want = ode_oracle(1.0, -0.5, 1e-4);
        let j = jacobi(1.0, -0.5).unwrap();
        assert!((j.sn - want[0]).abs() < 1e-11);
        assert!((j.cn - want[1]).abs() < 1e-11);
        assert!((j.dn - want[2]).abs() < 1e-11);
    }

    #[test]
    fn positive_and_large_parameters_against_ode() {
        for (u, m) in [(2.3, 0.7), (0.8, 1.7), (1.5, 1.0)] {
            let want = ode_oracle(u, m, 1e-4);
            let j = jacobi(u, m).unwrap();
            assert!((j.sn - want[0]).abs() < 1e-10, "sn u={u} m={m}");
            assert!((j.cn - want[1]).abs() < 1e-10, "cn u={u} m={m}");
            assert!((j.dn - want[2]).abs() < 1e-10, "dn u={u} m={m}");
        }
    }

    #[test]
    fn k_values() {
        assert!((elliptic_k(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((elliptic_k(0.3).unwrap() - k_quadrature(0.3)).abs() < 1e-10);
        assert!((elliptic_k(-0.5).unwrap() - k_quadrature(-0.5)).abs() < 1e-10);
        let period = 4.0 * elliptic_k(-0.5).unwrap();
        assert!((period - 5.66).abs() / 5.66 < 0.01);
        assert!(elliptic_k(1.0).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(jacobi(f64::NAN, 0.5).is_err());
        assert!(jacobi(1.0, f64::INFINITY).is_err());
        assert!(jacobi(1.0, 2e6).is_err());
    }

    #[test]
    fn identities_on_grid() {
        for m in [-0.9, -0.5, 0.0, 0.5, 0.9] {
            for i in 0..=200 {
                let u = -10.0 + 0.1 * i as f64;
                let j = jacobi(u, m).unwrap();
                assert!((j.sn * j.sn + j.cn * j.cn - 1.0).abs() < 1e-10);
                assert!((j.dn * j.dn + m * j.sn * j.sn - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn periodicity() {
        for m in [-0.9, -0.5, 0.0, 0.5, 0.9] {
            let p = 4.0 * elliptic_k(m).unwrap();
            for u in [-2.0, 0.3, 1.7, 4.0] {
                let a = jacobi(u, m).unwrap().sn;
                let b = jacobi(u + p, m).unwrap().sn;
                assert!((a - b).abs() < 1e-8, "m={m} u={u}");
            }
        }
    }
}
