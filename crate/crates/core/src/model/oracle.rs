//! Fock probabilities by direct overlap of Wigner functions.
//!
//! `P(n) = 2 pi * integral of W(q, p) W_n(q, p)` with `W` the zero-mean
//! Gaussian of covariance `diag(vq, vp)` and
//! `W_n(q, p) = ((-1)^n / pi) exp(-q^2 - p^2) L_n(2q^2 + 2p^2)`.
//! After absorbing both Gaussians into the Hermite weight the integrand is a
//! polynomial of degree `2n` in each coordinate, so a tensor Gauss-Hermite
//! rule with more than `n` nodes per axis integrates it exactly. This path
//! shares nothing with the Legendre closed form and serves as its
//! cross-check.

use alloc::vec::Vec;
use core::f64::consts::PI;

use super::QuadratureVariances;
use crate::error::{Error, Result};

/// Largest Fock number accepted by [`fock_probability_oracle`].
pub const ORACLE_MAX_N: usize = 30;

pub fn fock_probability_oracle(v: &QuadratureVariances, n: usize) -> Result<f64> {
    if n > ORACLE_MAX_N {
        return Err(Error::InvalidArgument("oracle supports Fock numbers up to 30"));
    }
    let (nodes, weights) = gauss_hermite(n + 8);
    // exp(-q^2/(2 vq)) exp(-q^2) = exp(-a_q q^2)
    let a_q = 1.0 + 0.5 / v.vq();
    let a_p = 1.0 + 0.5 / v.vp();
    let mut sum = 0.0;
    for (x, wx) in nodes.iter().zip(&weights) {
        let q2 = x * x / a_q;
        for (y, wy) in nodes.iter().zip(&weights) {
            let p2 = y * y / a_p;
            sum += wx * wy * laguerre(n, 2.0 * (q2 + p2));
        }
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let norm = PI * libm::sqrt(v.vq() * v.vp()) * libm::sqrt(a_q * a_p);
    Ok(sign * sum / norm)
}

fn laguerre(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Nodes and weights of the `m`-point Gauss-Hermite rule for weight
/// `exp(-x^2)`, by Newton iteration on orthonormal Hermite functions.
fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    const PI_M4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let mut x = alloc::vec![0.0; m];
    let mut w = alloc::vec![0.0; m];
    let mf = m as f64;
    let mut z = 0.0;
    for i in 0..m.div_ceil(2) {
        z = match i {
            0 => libm::sqrt(2.0 * mf + 1.0) - 1.855_75 * libm::pow(2.0 * mf + 1.0, -1.0 / 6.0),
            1 => z - 1.14 * libm::pow(mf, 0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut derivative = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (PI_M4, 0.0);
            for j in 0..m {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * libm::sqrt(2.0 / (jf + 1.0)) * p2 - libm::sqrt(jf / (jf + 1.0)) * p3;
            }
            derivative = libm::sqrt(2.0 * mf) * p2;
            let step = p1 / derivative;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[m - 1 - i] = -z;
        w[i] = 2.0 / (derivative * derivative);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fock_probability, SqueezedThermalState};
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_rule_moments() {
        // integral of x^(2k) exp(-x^2) = Gamma(k + 1/2)
        let (x, w) = gauss_hermite(12);
        let mut gamma = PI.sqrt();
        for k in 0..12 {
            let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(2 * k)).sum();
            assert!((m / gamma - 1.0).abs() < 1e-12, "k={k}");
            gamma *= k as f64 + 0.5;
        }
        let odd: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(3)).sum();
        assert_abs_diff_eq!(odd, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn laguerre_low_orders() {
        let x = 0.7;
        assert_eq!(laguerre(0, x), 1.0);
        assert_abs_diff_eq!(laguerre(1, x), 1.0 - x, epsilon = 1e-15);
        assert_abs_diff_eq!(laguerre(2, x), (x * x - 4.0 * x + 2.0) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            laguerre(3, x),
            (-x.powi(3) + 9.0 * x * x - 18.0 * x + 6.0) / 6.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn vacuum_and_thermal() {
        let vac = QuadratureVariances::VACUUM;
        assert_abs_diff_eq!(fock_probability_oracle(&vac, 0).unwrap(), 1.0, epsilon = 1e-8);
        let th = SqueezedThermalState::new(0.0, 1.0).unwrap().variances();
        assert_abs_diff_eq!(fock_probability_oracle(&th, 3).unwrap(), 0.0625, epsilon = 1e-8);
    }

    #[test]
    fn squeezed_vacuum_second_level() {
        let r: f64 = 0.8;
        let v = SqueezedThermalState::new(r, 0.0).unwrap().variances();
        let expected = r.tanh().powi(2) / (2.0 * r.cosh());
        assert_abs_diff_eq!(fock_probability_oracle(&v, 2).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn agrees_with_closed_form_at_high_squeezing() {
        let v = SqueezedThermalState::new(2.5, 0.01).unwrap().variances();
        for n in 0..=20 {
            let oracle = fock_probability_oracle(&v, n).unwrap();
            assert_abs_diff_eq!(oracle, fock_probability(&v, n), epsilon = 1e-8);
        }
    }

    #[test]
    fn rejects_large_n() {
        assert!(fock_probability_oracle(&QuadratureVariances::VACUUM, 31).is_err());
    }
}
