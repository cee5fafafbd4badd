//! Parametric-bootstrap confidence intervals and coverage simulation.
//!
//! Replicate `i` of a bootstrap seeded by `seed` draws its data from
//! `seed.child(i)`. A coverage experiment seeded by `seed` draws its
//! observed data from `seed` itself and bootstraps with the same `seed`, so
//! a whole experiment is a pure function of its [`SeedSpec`].

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::estimation::{fit, posterior_weights, FitResult, FockHistogram, Observations, PriorShape};
use crate::model::{fock_distribution, from_variances, FockDistribution, QuadratureVariances, SqueezedThermalState};
use crate::numerics::{std_normal_cdf, std_normal_quantile};
use crate::sampling::{sample_histogram, SeedSpec};

/// Largest tolerated fraction of non-converged refits in a replicate set.
pub const MAX_FAILED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parameter {
    Vq,
    Vp,
    R,
    Nbar,
}

impl Parameter {
    pub const ALL: [Parameter; 4] = [Parameter::Vq, Parameter::Vp, Parameter::R, Parameter::Nbar];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::Vq => "vq",
            Parameter::Vp => "vp",
            Parameter::R => "r",
            Parameter::Nbar => "nbar",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The four parameters of one estimate, in both parametrizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub vq: f64,
    pub vp: f64,
    pub r: f64,
    pub nbar: f64,
}

impl Estimate {
    pub fn from_variances(v: &QuadratureVariances) -> Self {
        let s = from_variances(v);
        Self {
            vq: v.vq(),
            vp: v.vp(),
            r: s.r(),
            nbar: s.nbar(),
        }
    }

    pub fn from_state(s: &SqueezedThermalState) -> Self {
        let v = s.variances();
        Self {
            vq: v.vq(),
            vp: v.vp(),
            r: s.r(),
            nbar: s.nbar(),
        }
    }

    pub fn get(&self, p: Parameter) -> f64 {
        match p {
            Parameter::Vq => self.vq,
            Parameter::Vp => self.vp,
            Parameter::R => self.r,
            Parameter::Nbar => self.nbar,
        }
    }
}

impl From<&FitResult> for Estimate {
    fn from(f: &FitResult) -> Self {
        Self {
            vq: f.variances.vq(),
            vp: f.variances.vp(),
            r: f.state.r(),
            nbar: f.state.nbar(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replicate {
    pub estimate: Estimate,
    pub converged: bool,
}

/// Bootstrap refits, in replicate order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    replicates: Vec<Replicate>,
}

impl ReplicateSet {
    /// Checks `n_b >= 2` and the failed-refit limit.
    pub fn new(replicates: Vec<Replicate>) -> Result<Self> {
        if replicates.len() < 2 {
            return Err(Error::InvalidArgument("need at least two bootstrap replicates"));
        }
        let failed = replicates.iter().filter(|r| !r.converged).count();
        if failed as f64 > MAX_FAILED_FRACTION * replicates.len() as f64 {
            return Err(Error::TooManyFailedRefits {
                failed,
                total: replicates.len(),
            });
        }
        Ok(Self { replicates })
    }

    pub fn n_b(&self) -> usize {
        self.replicates.len()
    }

    pub fn replicates(&self) -> &[Replicate] {
        &self.replicates
    }

    pub fn n_failed(&self) -> usize {
        self.replicates.iter().filter(|r| !r.converged).count()
    }

    /// Converged estimates of `p`, ascending.
    pub fn sorted(&self, p: Parameter) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .replicates
            .iter()
            .filter(|r| r.converged)
            .map(|r| r.estimate.get(p))
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn interval(&self, p: Parameter, method: IntervalMethod, point: &Estimate, alpha: f64) -> Result<ConfidenceInterval> {
        let sorted = self.sorted(p);
        let (lower, upper) = match method {
            IntervalMethod::Percentile => percentile_bounds(&sorted, alpha)?,
            IntervalMethod::Bc => bc_bounds(&sorted, point.get(p), alpha)?,
        };
        Ok(ConfidenceInterval {
            parameter: p,
            method,
            level: 1.0 - 2.0 * alpha,
            lower,
            upper,
        })
    }

    /// Intervals for all four parameters, in [`Parameter::ALL`] order.
    pub fn intervals(&self, method: IntervalMethod, point: &Estimate, alpha: f64) -> Result<[ConfidenceInterval; 4]> {
        let mut out = [ConfidenceInterval::EMPTY; 4];
        for (slot, p) in out.iter_mut().zip(Parameter::ALL) {
            *slot = self.interval(p, method, point, alpha)?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntervalMethod {
    Percentile,
    Bc,
}

impl IntervalMethod {
    pub const ALL: [IntervalMethod; 2] = [IntervalMethod::Percentile, IntervalMethod::Bc];

    pub fn name(self) -> &'static str {
        match self {
            IntervalMethod::Percentile => "percentile",
            IntervalMethod::Bc => "bc",
        }
    }
}

impl fmt::Display for IntervalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub parameter: Parameter,
    pub method: IntervalMethod,
    /// Nominal confidence level `1 - 2 alpha`.
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ConfidenceInterval {
    const EMPTY: Self = Self {
        parameter: Parameter::Vq,
        method: IntervalMethod::Percentile,
        level: 0.0,
        lower: 0.0,
        upper: 0.0,
    };

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

fn check_inputs(sorted: &[f64], alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if sorted.len() < 2 {
        return Err(Error::InvalidArgument("need at least two bootstrap estimates"));
    }
    if sorted.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("bootstrap estimates must be finite"));
    }
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("bootstrap estimates must be sorted ascending"));
    }
    Ok(())
}

// floor with a guard against products like 1000 * 0.95 landing just below an integer
fn floor_index(x: f64) -> usize {
    libm::floor(x + 1e-9).max(0.0) as usize
}

/// Percentile interval `[theta_l, theta_m]` with `l = floor(N_B alpha)`,
/// `m = floor(N_B (1 - alpha))`, 1-based and clamped to `[1, N_B]`.
pub fn percentile_interval(sorted: &[f64], parameter: Parameter, alpha: f64) -> Result<ConfidenceInterval> {
    let (lower, upper) = percentile_bounds(sorted, alpha)?;
    Ok(ConfidenceInterval {
        parameter,
        method: IntervalMethod::Percentile,
        level: 1.0 - 2.0 * alpha,
        lower,
        upper,
    })
}

/// 1-based order-statistic indices `(l, m)` of the percentile interval.
pub fn percentile_indices(n_b: usize, alpha: f64) -> (usize, usize) {
    let n = n_b as f64;
    let l = floor_index(n * alpha).clamp(1, n_b);
    let m = floor_index(n * (1.0 - alpha)).clamp(1, n_b);
    (l, m)
}

fn percentile_bounds(sorted: &[f64], alpha: f64) -> Result<(f64, f64)> {
    check_inputs(sorted, alpha)?;
    let (l, m) = percentile_indices(sorted.len(), alpha);
    Ok((sorted[l - 1], sorted[m - 1]))
}

/// Bias-corrected percentile interval.
///
/// `b = Phi^-1(p/N_B)` where `p` counts replicates `<= point` (clamped to
/// `[1, N_B - 1]`); the endpoints are the order statistics at levels
/// `Phi(2b + z_alpha)` and `Phi(2b + z_{1-alpha})`, interpolated linearly at
/// 1-based position `N_B * level`.
pub fn bc_interval(sorted: &[f64], point: f64, parameter: Parameter, alpha: f64) -> Result<ConfidenceInterval> {
    let (lower, upper) = bc_bounds(sorted, point, alpha)?;
    Ok(ConfidenceInterval {
        parameter,
        method: IntervalMethod::Bc,
        level: 1.0 - 2.0 * alpha,
        lower,
        upper,
    })
}

/// Corrected levels `(alpha_lo, alpha_hi)` of the BC interval.
pub fn bc_levels(sorted: &[f64], point: f64, alpha: f64) -> Result<(f64, f64)> {
    check_inputs(sorted, alpha)?;
    if !point.is_finite() {
        return Err(Error::InvalidArgument("point estimate must be finite"));
    }
    let n_b = sorted.len();
    let below = sorted.partition_point(|&x| x <= point).clamp(1, n_b - 1);
    let b = std_normal_quantile(below as f64 / n_b as f64)?;
    let z_lo = std_normal_quantile(alpha)?;
    let z_hi = std_normal_quantile(1.0 - alpha)?;
    Ok((std_normal_cdf(2.0 * b + z_lo), std_normal_cdf(2.0 * b + z_hi)))
}

fn bc_bounds(sorted: &[f64], point: f64, alpha: f64) -> Result<(f64, f64)> {
    let (lo, hi) = bc_levels(sorted, point, alpha)?;
    Ok((interpolate(sorted, lo), interpolate(sorted, hi)))
}

fn interpolate(sorted: &[f64], level: f64) -> f64 {
    let n_b = sorted.len();
    let x = n_b as f64 * level;
    if x <= 1.0 {
        return sorted[0];
    }
    if x >= n_b as f64 {
        return sorted[n_b - 1];
    }
    let j = libm::floor(x) as usize;
    let frac = x - j as f64;
    let (a, b) = (sorted[j - 1], sorted[j]);
    if frac == 0.0 {
        a
    } else {
        a + frac * (b - a)
    }
}

/// One refit of data simulated from `model`.
pub fn bootstrap_replicate(model: &FockDistribution, n_shots: u64, prior: &PriorShape, seed: SeedSpec) -> Result<Replicate> {
    let h = sample_histogram(model, n_shots, seed)?;
    let result = fit_histogram(&h, prior)?;
    Ok(Replicate {
        estimate: Estimate::from(&result),
        converged: result.converged,
    })
}

/// Posterior-weighted fit of a histogram.
pub fn fit_histogram(h: &FockHistogram, prior: &PriorShape) -> Result<FitResult> {
    let obs = Observations::from(h);
    fit(&obs, &posterior_weights(&obs, prior))
}

/// `n_b` replicates simulated from `point` at its own `n_max`, refit with
/// posterior weights. Replicate `i` uses `seed.child(i)`.
pub fn parametric_bootstrap(
    point: &FitResult,
    n_shots: u64,
    n_b: usize,
    prior: &PriorShape,
    seed: SeedSpec,
) -> Result<ReplicateSet> {
    if !point.converged {
        return Err(Error::NotConverged);
    }
    if n_b < 2 {
        return Err(Error::InvalidArgument("need at least two bootstrap replicates"));
    }
    let model = fock_distribution(&point.variances, point.n_max)?;
    let replicates = (0..n_b)
        .map(|i| bootstrap_replicate(&model, n_shots, prior, seed.child(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    ReplicateSet::new(replicates)
}

/// Settings shared by every experiment of a coverage run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageSettings {
    pub n_shots: u64,
    pub n_max: usize,
    pub n_b: usize,
    pub alpha: f64,
    pub prior: PriorShape,
}

/// Intervals from one simulated experiment; both methods share the same
/// replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageExperiment {
    pub estimate: Estimate,
    pub percentile: [ConfidenceInterval; 4],
    pub bc: [ConfidenceInterval; 4],
    pub failed_replicates: usize,
}

impl CoverageExperiment {
    pub fn intervals(&self, method: IntervalMethod) -> &[ConfidenceInterval; 4] {
        match method {
            IntervalMethod::Percentile => &self.percentile,
            IntervalMethod::Bc => &self.bc,
        }
    }
}

/// Simulates data from `truth`, fits it, bootstraps the fit and builds
/// percentile and BC intervals.
pub fn coverage_experiment(truth: &SqueezedThermalState, settings: &CoverageSettings, seed: SeedSpec) -> Result<CoverageExperiment> {
    if !(settings.alpha > 0.0 && settings.alpha < 0.5) {
        return Err(Error::InvalidAlpha(settings.alpha));
    }
    let model = fock_distribution(&truth.variances(), settings.n_max)?;
    let h = sample_histogram(&model, settings.n_shots, seed)?;
    let point = fit_histogram(&h, &settings.prior)?;
    let set = parametric_bootstrap(&point, settings.n_shots, settings.n_b, &settings.prior, seed)?;
    let estimate = Estimate::from(&point);
    Ok(CoverageExperiment {
        estimate,
        percentile: set.intervals(IntervalMethod::Percentile, &estimate, settings.alpha)?,
        bc: set.intervals(IntervalMethod::Bc, &estimate, settings.alpha)?,
        failed_replicates: set.n_failed(),
    })
}

/// Fraction of intervals containing the true value of one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub parameter: Parameter,
    pub method: IntervalMethod,
    pub covered: usize,
    pub n_experiments: usize,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        self.covered as f64 / self.n_experiments as f64
    }

    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub fn standard_error(&self) -> f64 {
        let p = self.fraction();
        libm::sqrt(p * (1.0 - p) / self.n_experiments as f64)
    }
}

/// Per-parameter coverage of `method` over completed experiments.
pub fn tally_coverage(truth: &SqueezedThermalState, experiments: &[CoverageExperiment], method: IntervalMethod) -> [Coverage; 4] {
    let t = Estimate::from_state(truth);
    Parameter::ALL.map(|p| Coverage {
        parameter: p,
        method,
        covered: experiments
            .iter()
            .filter(|e| e.intervals(method)[p.index()].contains(t.get(p)))
            .count(),
        n_experiments: experiments.len(),
    })
}

/// Serial coverage run: experiment `e` is seeded by `seed.child(e)`.
pub fn coverage_probability(
    truth: &SqueezedThermalState,
    settings: &CoverageSettings,
    n_experiments: usize,
    method: IntervalMethod,
    seed: SeedSpec,
) -> Result<[Coverage; 4]> {
    if n_experiments == 0 {
        return Err(Error::InvalidArgument("need at least one experiment"));
    }
    let experiments = (0..n_experiments)
        .map(|e| coverage_experiment(truth, settings, seed.child(e as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(tally_coverage(truth, &experiments, method))
}
