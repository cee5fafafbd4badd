//! Weighted least-squares estimation of quadrature variances from Fock
//! counts.
//!
//! The objective is `D(vq, vp) = sum_n w_n (P(n | vq, vp) - f_n)^2` over the
//! resolved bins and the overflow bin. Weights are derived once from the
//! data and held fixed while minimizing.
//!
//! The fit searches `(r, nbar)`, where the physical constraints
//! `vq * vp >= 1/4` and `vq <= vp` reduce to the bounds `r >= 0`, `nbar >= 0`:
//! a coarse grid first, then a bounded Nelder-Mead refinement started from
//! the best grid point.

mod simplex;

use simplex::SimplexOutcome;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{
    check_n_max, fill_probabilities, FockDistribution, QuadratureVariances, SqueezedThermalState,
    MAX_N,
};

/// Observed counts `k_0..=k_{n_max}`, the overflow count, and their total.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FockHistogram {
    counts: Vec<u64>,
    overflow: u64,
    total: u64,
}

impl FockHistogram {
    /// Histogram whose total is the sum of all bins.
    pub fn new(counts: Vec<u64>, overflow: u64) -> Result<Self> {
        let total = counts.iter().sum::<u64>() + overflow;
        Self::with_total(counts, overflow, total)
    }

    /// Histogram with an explicitly stated total, which must match the bins.
    pub fn with_total(counts: Vec<u64>, overflow: u64, total: u64) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidHistogram("need at least two resolved bins"));
        }
        check_n_max(counts.len() - 1)?;
        let sum = counts.iter().try_fold(overflow, |acc, &k| acc.checked_add(k));
        if sum != Some(total) {
            return Err(Error::InvalidHistogram("bin counts do not add up to the total"));
        }
        if total == 0 {
            return Err(Error::InvalidHistogram("total count must be positive"));
        }
        Ok(Self { counts, overflow, total })
    }

    pub fn n_max(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn overflow_count(&self) -> u64 {
        self.overflow
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Resolved counts followed by the overflow count.
    pub fn bins(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.iter().copied().chain(core::iter::once(self.overflow))
    }

    /// Relative frequencies `k_n / N`, overflow last.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.bins().map(|k| k as f64 / n).collect()
    }
}

/// Bin counts as reals, overflow last.
///
/// Fits and weights operate on this form so that the large-`N` limit
/// (`k_n = N P(n)` exactly, fractional) can be fed through the same path as
/// sampled histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    counts: Vec<f64>,
    total: f64,
}

impl Observations {
    pub fn new(counts_with_overflow: Vec<f64>, total: f64) -> Result<Self> {
        if counts_with_overflow.len() < 3 {
            return Err(Error::InvalidHistogram("need at least two resolved bins plus overflow"));
        }
        check_n_max(counts_with_overflow.len() - 2)?;
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidHistogram("total count must be positive"));
        }
        if counts_with_overflow.iter().any(|k| !(*k >= 0.0 && *k <= total)) {
            return Err(Error::InvalidHistogram("counts must lie in [0, total]"));
        }
        let sum: f64 = counts_with_overflow.iter().sum();
        if (sum - total).abs() > 1e-9 * total {
            return Err(Error::InvalidHistogram("bin counts do not add up to the total"));
        }
        Ok(Self {
            counts: counts_with_overflow,
            total,
        })
    }

    /// Expected counts `N P(n)` of a model distribution: the `N -> infinity`
    /// limit of a sampled histogram.
    pub fn expected(distribution: &FockDistribution, total: f64) -> Result<Self> {
        let counts = distribution.bins().map(|p| p * total).collect();
        Self::new(counts, total)
    }

    pub fn n_max(&self) -> usize {
        self.counts.len() - 2
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        self.counts[bin] / self.total
    }
}

impl From<&FockHistogram> for Observations {
    fn from(h: &FockHistogram) -> Self {
        Self {
            counts: h.bins().map(|k| k as f64).collect(),
            total: h.total as f64,
        }
    }
}

/// Shape parameters `(nu, eta)` of the Beta prior on each bin probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorShape {
    nu: f64,
    eta: f64,
}

impl PriorShape {
    pub fn new(nu: f64, eta: f64) -> Result<Self> {
        if nu > 0.0 && eta > 0.0 && nu.is_finite() && eta.is_finite() {
            Ok(Self { nu, eta })
        } else {
            Err(Error::InvalidPrior { nu, eta })
        }
    }

    /// `nu = eta = 1`.
    pub const UNIFORM: Self = Self { nu: 1.0, eta: 1.0 };

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

impl Default for PriorShape {
    fn default() -> Self {
        Self::UNIFORM
    }
}

/// One positive, finite weight per bin, overflow last.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().all(|w| *w > 0.0 && w.is_finite()) {
            Ok(Self(weights))
        } else {
            Err(Error::InvalidArgument("weights must be positive and finite"))
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Inverse Beta-posterior variance of each bin probability:
/// `w_n = (nu + N + eta)^2 (nu + N + eta + 1) / ((k_n + nu)(N + eta - k_n))`.
pub fn posterior_weights(obs: &Observations, prior: &PriorShape) -> WeightVector {
    let (nu, eta, n) = (prior.nu, prior.eta, obs.total);
    let scale = nu + n + eta;
    WeightVector(
        obs.counts
            .iter()
            .map(|&k| scale * scale * (scale + 1.0) / ((k + nu) * (n + eta - k)))
            .collect(),
    )
}

/// Inverse plug-in binomial variance `N^3 / (k_n (N - k_n))`.
///
/// Empty or saturated bins would give an infinite weight; there `k_n` and
/// `N - k_n` are floored at 1/2.
pub fn mle_weights(obs: &Observations) -> WeightVector {
    let n = obs.total;
    WeightVector(
        obs.counts
            .iter()
            .map(|&k| n * n * n / (k.max(0.5) * (n - k).max(0.5)))
            .collect(),
    )
}

pub fn uniform_weights(obs: &Observations) -> WeightVector {
    WeightVector(alloc::vec![1.0; obs.n_bins()])
}

/// How bin weights are derived from the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightScheme {
    Posterior(PriorShape),
    Mle,
    Uniform,
}

impl WeightScheme {
    pub fn weights(&self, obs: &Observations) -> WeightVector {
        match self {
            WeightScheme::Posterior(prior) => posterior_weights(obs, prior),
            WeightScheme::Mle => mle_weights(obs),
            WeightScheme::Uniform => uniform_weights(obs),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::Posterior(_) => "posterior",
            WeightScheme::Mle => "mle",
            WeightScheme::Uniform => "uniform",
        }
    }
}

impl Default for WeightScheme {
    fn default() -> Self {
        WeightScheme::Posterior(PriorShape::UNIFORM)
    }
}

/// Weighted sum of squared residuals between model and observed frequencies,
/// overflow bin included.
pub fn objective(v: &QuadratureVariances, obs: &Observations, w: &WeightVector) -> Result<f64> {
    if w.len() != obs.n_bins() {
        return Err(Error::WeightLength {
            expected: obs.n_bins(),
            got: w.len(),
        });
    }
    Ok(residual_sum(v, obs, w.as_slice()))
}

fn residual_sum(v: &QuadratureVariances, obs: &Observations, w: &[f64]) -> f64 {
    let mut probs = [0.0; MAX_N + 1];
    let resolved = &mut probs[..=obs.n_max()];
    fill_probabilities(v, resolved);
    let inv_total = 1.0 / obs.total;
    let mut sum = 0.0;
    let mut mass = 0.0;
    for ((p, k), w) in resolved.iter().zip(&obs.counts).zip(w) {
        let d = p - k * inv_total;
        sum += w * d * d;
        mass += p;
    }
    let last = obs.counts.len() - 1;
    let d = (1.0 - mass).max(0.0) - obs.counts[last] * inv_total;
    sum + w[last] * d * d
}

/// Search settings for [`fit_with`].
///
/// The coarse grid is laid out in `(r, 1 + nbar)`; the simplex refinement
/// runs in `(r^2, nbar)` and stops once its extent in both coordinates is
/// below `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Upper end of the coarse grid in `r`.
    pub r_max: f64,
    /// Upper end of the coarse grid in `1 + nbar`.
    pub occupancy_max: f64,
    /// Grid points in `r` (linear spacing from 0).
    pub grid_r: usize,
    /// Grid points in `1 + nbar` (log spacing from 1).
    pub grid_occupancy: usize,
    /// Simplex extent in both `r^2` and `nbar` at which refinement stops.
    pub tolerance: f64,
    /// Evaluation budget for the simplex refinement.
    pub max_evaluations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            r_max: 3.5,
            occupancy_max: 8.0,
            grid_r: 60,
            grid_occupancy: 60,
            tolerance: 1e-9,
            max_evaluations: 10_000,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0 && self.occupancy_max > 1.0) {
            return Err(Error::InvalidArgument("grid bounds must be r_max > 0 and occupancy_max > 1"));
        }
        if self.grid_r < 2 || self.grid_occupancy < 2 {
            return Err(Error::InvalidArgument("grid needs at least two points per axis"));
        }
        if !(self.tolerance > 0.0) || self.max_evaluations < 3 {
            return Err(Error::InvalidArgument("tolerance and evaluation budget must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub variances: QuadratureVariances,
    pub state: SqueezedThermalState,
    /// Objective value at `variances`.
    pub objective: f64,
    pub converged: bool,
    /// Objective evaluations, grid included.
    pub evaluations: usize,
    pub n_max: usize,
}

/// Constrained minimizer of the objective with default [`FitOptions`].
pub fn fit(obs: &Observations, w: &WeightVector) -> Result<FitResult> {
    fit_with(obs, w, &FitOptions::default())
}

pub fn fit_with(obs: &Observations, w: &WeightVector, opts: &FitOptions) -> Result<FitResult> {
    opts.validate()?;
    if w.len() != obs.n_bins() {
        return Err(Error::WeightLength {
            expected: obs.n_bins(),
            got: w.len(),
        });
    }
    let weights = w.as_slice();
    let mut evaluations = 0usize;
    // The simplex works in (r^2, nbar): P(n) depends on r through even
    // functions only, so the objective is quartic in r at r = 0 but has a
    // regular slope in r^2 and the bound can be reached exactly.
    let mut eval = |[r_squared, nbar]: [f64; 2]| {
        evaluations += 1;
        residual_sum(&variances_at(libm::sqrt(r_squared), nbar), obs, weights)
    };

    let r_step = opts.r_max / (opts.grid_r - 1) as f64;
    let log_step = libm::log(opts.occupancy_max) / (opts.grid_occupancy - 1) as f64;
    let mut best = ([0.0, 0.0], f64::INFINITY);
    let mut best_occupancy = 1.0;
    for j in 0..opts.grid_occupancy {
        let occupancy = if j == 0 { 1.0 } else { libm::exp(log_step * j as f64) };
        for i in 0..opts.grid_r {
            let r = r_step * i as f64;
            let point = [r * r, occupancy - 1.0];
            let value = eval(point);
            if value < best.1 {
                best = (point, value);
                best_occupancy = occupancy;
            }
        }
    }

    let r_best = libm::sqrt(best.0[0]);
    let steps = [
        (2.0 * r_best + r_step) * r_step,
        best_occupancy * (libm::exp(log_step) - 1.0),
    ];
    let budget = opts.max_evaluations;
    let mut outcome = simplex::minimize(&mut eval, best.0, steps, opts.tolerance, budget);
    let mut used = outcome.evaluations;
    // A simplex flattened onto a bound cannot leave it. Restart from the best
    // vertex with successively smaller initial simplices; any improvement
    // resets the scale.
    let mut scale = 1.0;
    while outcome.converged && used < budget && scale >= 1e-4 {
        let restart_steps = [steps[0] * scale, steps[1] * scale];
        let restart = simplex::minimize(&mut eval, outcome.point, restart_steps, opts.tolerance, budget - used);
        used += restart.evaluations;
        if restart.value < outcome.value * (1.0 - 1e-12) {
            outcome = restart;
            scale = 1.0;
        } else {
            if restart.value <= outcome.value {
                outcome = SimplexOutcome { converged: outcome.converged && restart.converged, ..restart };
            }
            scale *= 0.1;
        }
    }

    let [r_squared, nbar] = outcome.point;
    let r = libm::sqrt(r_squared);
    let variances = variances_at(r, nbar);
    let objective = residual_sum(&variances, obs, weights);
    Ok(FitResult {
        variances,
        state: variances.state(),
        objective,
        converged: outcome.converged,
        evaluations,
        n_max: obs.n_max(),
    })
}

fn variances_at(r: f64, nbar: f64) -> QuadratureVariances {
    // r, nbar >= 0 by construction of the search
    crate::model::to_variances(&SqueezedThermalState::new(r, nbar).unwrap_or(SqueezedThermalState::VACUUM))
}
