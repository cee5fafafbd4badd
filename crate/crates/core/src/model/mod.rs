//! Squeezed thermal states, their Fock-number distribution and fidelity.
//!
//! Quadrature variances `(vq, vp)` are the canonical coordinates; the
//! squeezing/temperature pair `(r, nbar)` is a presentation layer related by
//! `vq = (2 nbar + 1) e^(-2r) / 2` and `vp = (2 nbar + 1) e^(2r) / 2`.
//! Units are such that the vacuum has `vq = vp = 1/2`.

mod oracle;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::scaled_legendre_into;

pub use oracle::{fock_probability_oracle, ORACLE_MAX_N};

/// Largest Fock number the closed form is supported for.
pub const MAX_N: usize = 64;

/// Default detector resolution: Fock numbers 0..=20 plus one overflow bin.
pub const DEFAULT_N_MAX: usize = 20;

/// Slack allowed on the uncertainty product `vq * vp >= 1/4`.
pub const HEISENBERG_TOLERANCE: f64 = 1e-12;

/// Squeezing `r >= 0` and mean thermal occupation `nbar >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedThermalState {
    r: f64,
    nbar: f64,
}

impl SqueezedThermalState {
    pub fn new(r: f64, nbar: f64) -> Result<Self> {
        if !r.is_finite() || !nbar.is_finite() {
            return Err(Error::InvalidState("parameters must be finite"));
        }
        if r < 0.0 {
            return Err(Error::InvalidState("squeezing r must be >= 0"));
        }
        if nbar < 0.0 {
            return Err(Error::InvalidState("thermal occupation nbar must be >= 0"));
        }
        Ok(Self { r, nbar })
    }

    pub const VACUUM: Self = Self { r: 0.0, nbar: 0.0 };

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn nbar(&self) -> f64 {
        self.nbar
    }

    pub fn variances(&self) -> QuadratureVariances {
        to_variances(self)
    }
}

/// Diagonal covariance matrix `diag(vq, vp)` with `vq <= vp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureVariances {
    vq: f64,
    vp: f64,
}

impl QuadratureVariances {
    pub fn new(vq: f64, vp: f64) -> Result<Self> {
        let invalid = |reason| Err(Error::InvalidVariances { vq, vp, reason });
        if !vq.is_finite() || !vp.is_finite() {
            return invalid("finiteness");
        }
        if vq <= 0.0 || vp <= 0.0 {
            return invalid("positivity");
        }
        if vq > vp {
            return invalid("the ordering vq <= vp");
        }
        if vq * vp < 0.25 - HEISENBERG_TOLERANCE {
            return invalid("the uncertainty bound vq * vp >= 1/4");
        }
        Ok(Self { vq, vp })
    }

    pub const VACUUM: Self = Self { vq: 0.5, vp: 0.5 };

    pub fn vq(&self) -> f64 {
        self.vq
    }

    pub fn vp(&self) -> f64 {
        self.vp
    }

    pub fn state(&self) -> SqueezedThermalState {
        from_variances(self)
    }
}

pub fn to_variances(state: &SqueezedThermalState) -> QuadratureVariances {
    let half_width = 0.5 * (2.0 * state.nbar + 1.0);
    let squeeze = libm::exp(2.0 * state.r);
    QuadratureVariances {
        vq: half_width / squeeze,
        vp: half_width * squeeze,
    }
}

pub fn from_variances(v: &QuadratureVariances) -> SqueezedThermalState {
    let r = 0.25 * libm::log(v.vp / v.vq);
    // products within HEISENBERG_TOLERANCE below 1/4 map onto nbar = 0
    let nbar = (libm::sqrt(v.vq * v.vp) - 0.5).max(0.0);
    SqueezedThermalState { r: r.max(0.0), nbar }
}

/// Model probabilities for Fock numbers `0..=n_max` plus the aggregate
/// probability of any larger Fock number.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDistribution {
    probs: Vec<f64>,
    overflow: f64,
}

impl FockDistribution {
    /// Builds a distribution from explicit resolved probabilities; the
    /// overflow mass is `1 - sum(probs)` clamped at zero.
    pub fn from_probabilities(probs: Vec<f64>) -> Result<Self> {
        check_n_max(probs.len().saturating_sub(1))?;
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidDistribution("probabilities must lie in [0, 1]"));
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidDistribution("probabilities sum above 1"));
        }
        Ok(Self::with_overflow(probs))
    }

    fn with_overflow(probs: Vec<f64>) -> Self {
        let resolved: f64 = probs.iter().sum();
        let overflow = (1.0 - resolved).max(0.0);
        Self { probs, overflow }
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn overflow(&self) -> f64 {
        self.overflow
    }

    /// Number of categories, including the overflow bin.
    pub fn n_bins(&self) -> usize {
        self.probs.len() + 1
    }

    /// Resolved probabilities followed by the overflow probability.
    pub fn bins(&self) -> impl Iterator<Item = f64> + '_ {
        self.probs.iter().copied().chain(core::iter::once(self.overflow))
    }
}

/// Probability of observing Fock number `n`.
///
/// With `A = (2vq-1)(2vp-1)`, `B = (2vq+1)(2vp+1)` and `c = 4 vq vp - 1`,
/// `P(n) = (2/sqrt(B)) * G_n(c/B, A/B)` where `G_n` is the scaled Legendre
/// sequence. This is the Legendre closed form with the ratio and argument
/// rescaled so no fractional power of the (negative, when squeezed) base
/// appears.
pub fn fock_probability(v: &QuadratureVariances, n: usize) -> f64 {
    let mut buf = [0.0; MAX_N + 1];
    if n <= MAX_N {
        fill_probabilities(v, &mut buf[..=n]);
        buf[n]
    } else {
        let mut big = alloc::vec![0.0; n + 1];
        fill_probabilities(v, &mut big);
        big[n]
    }
}

/// Fills `out[k] = P(k)` for every `k < out.len()`.
pub(crate) fn fill_probabilities(v: &QuadratureVariances, out: &mut [f64]) {
    let (two_vq, two_vp) = (2.0 * v.vq, 2.0 * v.vp);
    let a = (two_vq - 1.0) * (two_vp - 1.0);
    let b = (two_vq + 1.0) * (two_vp + 1.0);
    let c = two_vq * two_vp - 1.0;
    scaled_legendre_into(c / b, a / b, out);
    let p0 = 2.0 / libm::sqrt(b);
    for p in out.iter_mut() {
        *p = (*p * p0).max(0.0);
    }
}

/// Distribution over Fock numbers `0..=n_max` plus overflow.
pub fn fock_distribution(v: &QuadratureVariances, n_max: usize) -> Result<FockDistribution> {
    check_n_max(n_max)?;
    let mut probs = alloc::vec![0.0; n_max + 1];
    fill_probabilities(v, &mut probs);
    Ok(FockDistribution::with_overflow(probs))
}

pub(crate) fn check_n_max(n_max: usize) -> Result<()> {
    if (1..=MAX_N).contains(&n_max) {
        Ok(())
    } else {
        Err(Error::InvalidNMax(n_max))
    }
}

/// Fidelity between two zero-mean single-mode Gaussian states with diagonal
/// covariance matrices.
///
/// `F = 1 / (sqrt(X + L) - sqrt(L))` with `X = det(S1 + S2)` and
/// `L = 4 det(S1 + iJ/2) det(S2 + iJ/2)`, evaluated as the algebraically
/// equal `(sqrt(X + L) + sqrt(L)) / X`, which has no cancellation.
pub fn fidelity(a: &QuadratureVariances, b: &QuadratureVariances) -> f64 {
    let xi = (a.vq + b.vq) * (a.vp + b.vp);
    let excess_a = (a.vq * a.vp - 0.25).max(0.0);
    let excess_b = (b.vq * b.vp - 0.25).max(0.0);
    let lambda = 4.0 * (excess_a * excess_b);
    let f = (libm::sqrt(xi + lambda) + libm::sqrt(lambda)) / xi;
    f.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn thermal(nbar: f64) -> QuadratureVariances {
        SqueezedThermalState::new(0.0, nbar).unwrap().variances()
    }

    fn squeezed_vacuum(r: f64) -> QuadratureVariances {
        SqueezedThermalState::new(r, 0.0).unwrap().variances()
    }

    #[test]
    fn variances_of_reference_states() {
        assert_eq!(SqueezedThermalState::VACUUM.variances(), QuadratureVariances::VACUUM);
        let t = thermal(2.0);
        assert_eq!((t.vq(), t.vp()), (2.5, 2.5));
        let s = SqueezedThermalState::new(1.0, 0.01).unwrap().variances();
        // 0.51 * e^{-2}, 0.51 * e^{2}
        assert_abs_diff_eq!(s.vq(), 0.069_020_994_450_672_47, epsilon = 1e-15);
        assert_abs_diff_eq!(s.vp(), 3.768_418_610_454_632, epsilon = 1e-12);
        assert_abs_diff_eq!(s.vp(), 3.77, epsilon = 5e-3);
        assert_abs_diff_eq!(s.vq() * s.vp(), 0.51 * 0.51, epsilon = 1e-15);
    }

    #[test]
    fn inverse_of_reference_states() {
        let v = QuadratureVariances::VACUUM.state();
        assert_eq!((v.r(), v.nbar()), (0.0, 0.0));
        let t = QuadratureVariances::new(2.5, 2.5).unwrap().state();
        assert_eq!((t.r(), t.nbar()), (0.0, 2.0));
    }

    #[test]
    fn validation() {
        assert!(SqueezedThermalState::new(-0.1, 0.0).is_err());
        assert!(SqueezedThermalState::new(0.0, -0.1).is_err());
        assert!(SqueezedThermalState::new(f64::NAN, 0.0).is_err());
        assert!(QuadratureVariances::new(0.2, 0.2).is_err());
        assert!(QuadratureVariances::new(0.6, 0.5).is_err());
        assert!(QuadratureVariances::new(0.0, 1.0).is_err());
        assert!(QuadratureVariances::new(0.5, 0.5 - 1e-13).is_err());
        assert!(QuadratureVariances::new(0.5 - 1e-13, 0.5).is_ok());
    }

    #[test]
    fn vacuum_distribution() {
        let v = QuadratureVariances::VACUUM;
        assert_eq!(fock_probability(&v, 0), 1.0);
        for n in 1..10 {
            assert_eq!(fock_probability(&v, n), 0.0);
        }
        let d = fock_distribution(&v, 20).unwrap();
        assert_eq!(d.probs()[0], 1.0);
        assert!(d.probs()[1..].iter().all(|&p| p == 0.0));
        assert_eq!(d.overflow(), 0.0);
        assert_eq!(d.n_bins(), 22);
    }

    #[test]
    fn thermal_closed_form() {
        for &nbar in &[0.1, 1.0, 2.0] {
            let v = thermal(nbar);
            for n in 0..=20 {
                let expected = nbar.powi(n as i32) / (nbar + 1.0).powi(n as i32 + 1);
                assert_abs_diff_eq!(fock_probability(&v, n), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn thermal_overflow_is_geometric_tail() {
        let d = fock_distribution(&thermal(2.0), 20).unwrap();
        let tail = (2.0f64 / 3.0).powi(21);
        assert_abs_diff_eq!(d.overflow(), tail, epsilon = 1e-12);
        assert_abs_diff_eq!(d.overflow(), 2.0049e-4, epsilon = 1e-8);
    }

    #[test]
    fn squeezed_vacuum_closed_form() {
        for &r in &[0.5f64, 1.0, 2.5] {
            let v = squeezed_vacuum(r);
            let sech = 1.0 / r.cosh();
            assert_abs_diff_eq!(fock_probability(&v, 0), sech, epsilon = 1e-12);
            assert_abs_diff_eq!(
                fock_probability(&v, 2),
                r.tanh().powi(2) * sech / 2.0,
                epsilon = 1e-12
            );
            for n in (1..=21).step_by(2) {
                assert!(fock_probability(&v, n).abs() <= 1e-14, "r={r} n={n}");
            }
        }
    }

    #[test]
    fn distribution_matches_pointwise() {
        let v = SqueezedThermalState::new(1.3, 0.4).unwrap().variances();
        let d = fock_distribution(&v, 30).unwrap();
        for n in 0..=30 {
            assert_eq!(d.probs()[n], fock_probability(&v, n));
        }
        assert_eq!(fock_probability(&v, 70), {
            let mut buf = alloc::vec![0.0; 71];
            fill_probabilities(&v, &mut buf);
            buf[70]
        });
    }

    #[test]
    fn n_max_range() {
        let v = thermal(1.0);
        assert_eq!(fock_distribution(&v, 0), Err(Error::InvalidNMax(0)));
        assert_eq!(fock_distribution(&v, 65), Err(Error::InvalidNMax(65)));
        assert!(fock_distribution(&v, 64).is_ok());
    }

    #[test]
    fn explicit_distribution() {
        let d = FockDistribution::from_probabilities(alloc::vec![0.5, 0.25]).unwrap();
        assert_eq!(d.overflow(), 0.25);
        assert_eq!(d.bins().collect::<Vec<_>>(), alloc::vec![0.5, 0.25, 0.25]);
        assert!(FockDistribution::from_probabilities(alloc::vec![0.9, 0.2]).is_err());
        assert!(FockDistribution::from_probabilities(alloc::vec![-0.1, 0.5]).is_err());
        assert!(FockDistribution::from_probabilities(alloc::vec![1.0]).is_err());
        assert!(FockDistribution::from_probabilities(alloc::vec![]).is_err());
    }

    #[test]
    fn fidelity_reference_values() {
        let vac = QuadratureVariances::VACUUM;
        for &nbar in &[0.01, 0.5, 1.0, 2.0] {
            assert_abs_diff_eq!(fidelity(&vac, &thermal(nbar)), 1.0 / (nbar + 1.0), epsilon = 1e-14);
        }
        for &r in &[0.1f64, 1.0, 2.5] {
            assert_abs_diff_eq!(fidelity(&vac, &squeezed_vacuum(r)), 1.0 / r.cosh(), epsilon = 1e-14);
        }
        assert_abs_diff_eq!(fidelity(&vac, &squeezed_vacuum(1.0)), 0.648_054, epsilon = 1e-6);
    }

    #[test]
    fn fidelity_decreases_with_squeezing() {
        let vac = QuadratureVariances::VACUUM;
        let values: Vec<f64> = (0..=6)
            .map(|i| fidelity(&vac, &squeezed_vacuum(0.5 * i as f64)))
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    fn valid_variances() -> impl Strategy<Value = QuadratureVariances> {
        (-5.3f64..1.61, 0.0f64..1.0).prop_map(|(log_vq, t)| {
            let vq = libm::exp(log_vq);
            let lo = vq.max(0.25 / vq);
            // log-uniform between the lower bound and 100x above it
            let vp = lo * libm::exp(t * libm::log(100.0));
            QuadratureVariances::new(vq, vp).unwrap()
        })
    }

    fn valid_state() -> impl Strategy<Value = SqueezedThermalState> {
        (0.0f64..3.0, 0.0f64..5.0).prop_map(|(r, n)| SqueezedThermalState::new(r, n).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn normalization(v in valid_variances()) {
            let d = fock_distribution(&v, 64).unwrap();
            let resolved: f64 = d.probs().iter().sum();
            prop_assert!(resolved <= 1.0 + 1e-12);
            prop_assert!((resolved + d.overflow() - 1.0).abs() <= 1e-12);
            prop_assert!(d.bins().all(|p| (0.0..=1.0).contains(&p)));
        }

        #[test]
        fn overflow_obeys_markov_bound(r in 0.0f64..=2.5, nbar in 0.0f64..=2.0) {
            // mean photon number (vq + vp - 1)/2 bounds the tail mass:
            // sum_{n<=64} n P(n) + 65 * overflow <= <n>
            let v = SqueezedThermalState::new(r, nbar).unwrap().variances();
            let d = fock_distribution(&v, 64).unwrap();
            let mean = 0.5 * (v.vq() + v.vp() - 1.0);
            let resolved: f64 = d.probs().iter().enumerate().map(|(n, p)| n as f64 * p).sum();
            prop_assert!(resolved + 65.0 * d.overflow() <= mean * (1.0 + 1e-9) + 1e-12);
        }

        #[test]
        fn state_round_trip(v in valid_variances()) {
            let back = to_variances(&from_variances(&v));
            prop_assert!((back.vq() / v.vq() - 1.0).abs() <= 1e-12);
            prop_assert!((back.vp() / v.vp() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn variances_valid(s in valid_state()) {
            let v = s.variances();
            prop_assert!(QuadratureVariances::new(v.vq(), v.vp()).is_ok());
            let expected = (2.0 * s.nbar() + 1.0).powi(2) / 4.0;
            prop_assert!((v.vq() * v.vp() / expected - 1.0).abs() <= 1e-14);
        }

        #[test]
        fn fidelity_bounds_and_symmetry(a in valid_variances(), b in valid_variances()) {
            let f = fidelity(&a, &b);
            prop_assert!(f > 0.0 && f <= 1.0);
            prop_assert!((f - fidelity(&b, &a)).abs() <= 1e-14);
            prop_assert!((fidelity(&a, &a) - 1.0).abs() <= 1e-12);
        }
    }
}
