//! Special functions used by the Fock model and the bootstrap intervals.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Values `G_0..=G_n` of the scaled Legendre sequence
/// `G_n(c, u) = u^(n/2) * P_n(c / sqrt(u))`.
///
/// `G_n` is a polynomial in `c` and `u`, so the sequence stays real when
/// `u < 0` (the squeezed regime) where `c / sqrt(u)` would be imaginary.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledLegendreSequence {
    values: Vec<f64>,
}

impl ScaledLegendreSequence {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Highest order held.
    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }
}

/// Computes `G_0..=G_{n_max}` with the three-term recurrence
/// `G_{k+1} = ((2k+1) c G_k - k u G_{k-1}) / (k+1)`, `G_0 = 1`, `G_1 = c`.
pub fn scaled_legendre(c: f64, u: f64, n_max: usize) -> ScaledLegendreSequence {
    let mut values = alloc::vec![0.0; n_max + 1];
    scaled_legendre_into(c, u, &mut values);
    ScaledLegendreSequence { values }
}

/// Allocation-free form of [`scaled_legendre`]: fills every entry of `out`.
pub fn scaled_legendre_into(c: f64, u: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = c;
    for k in 1..out.len() - 1 {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0) * c * out[k] - kf * u * out[k - 1]) / (kf + 1.0);
    }
}

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * PI)
}

/// Inverse of [`std_normal_cdf`].
///
/// Acklam's rational approximation (relative error about 1.2e-9) followed by
/// one Newton step on the CDF. Upper-tail arguments are reflected so that
/// `quantile(p) == -quantile(1 - p)` holds exactly.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityDomain(p));
    }
    if p > 0.5 {
        // 1 - p is exact for p in [0.5, 1].
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

// p in (0, 0.5]
fn lower_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let x = acklam(p);
    let err = std_normal_cdf(x) - p;
    x - err / std_normal_pdf(x)
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}
