//! Index-addressed parallel drivers.
//!
//! Item `i` of every map is a pure function of `i`, and rayon collects an
//! indexed iterator in index order, so output is the same for any pool size.

use rayon::prelude::*;

use fockfit_core::bootstrap::{
    bootstrap_replicate, coverage_experiment, CoverageExperiment, CoverageSettings, ReplicateSet,
};
use fockfit_core::estimation::{FitResult, PriorShape};
use fockfit_core::model::{fock_distribution, SqueezedThermalState};
use fockfit_core::sampling::SeedSpec;

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "FOCKFIT_THREADS";

/// Thread count requested through `FOCKFIT_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Usage(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
        Err(e) => Err(Error::Usage(format!("{THREADS_ENV}: {e}"))),
    }
}

/// Pool with `threads` workers, or one per available core.
pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Usage(format!("cannot start thread pool: {e}")))
}

pub fn pool_from_env() -> Result<rayon::ThreadPool> {
    pool(threads_from_env()?)
}

/// `f(0), ..., f(n - 1)` in index order; the first error by index wins.
pub fn map_indexed<T, F>(n: usize, f: F) -> fockfit_core::Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> fockfit_core::Result<T> + Sync + Send,
{
    let results: Vec<_> = (0..n).into_par_iter().map(f).collect();
    results.into_iter().collect()
}

/// Parallel form of `fockfit_core::bootstrap::parametric_bootstrap`, with
/// identical output.
pub fn parametric_bootstrap(
    point: &FitResult,
    n_shots: u64,
    n_b: usize,
    prior: &PriorShape,
    seed: SeedSpec,
) -> fockfit_core::Result<ReplicateSet> {
    if !point.converged {
        return Err(fockfit_core::Error::NotConverged);
    }
    if n_b < 2 {
        return Err(fockfit_core::Error::InvalidArgument("need at least two bootstrap replicates"));
    }
    let model = fock_distribution(&point.variances, point.n_max)?;
    let replicates = map_indexed(n_b, |i| bootstrap_replicate(&model, n_shots, prior, seed.child(i as u64)))?;
    ReplicateSet::new(replicates)
}

/// Experiments `0..n` of a coverage run seeded by `seed`; experiment `e`
/// uses `seed.child(e)`, as in the serial core driver. Failed experiments
/// are returned as errors in their slot.
pub fn coverage_experiments(
    truth: &SqueezedThermalState,
    settings: &CoverageSettings,
    n: usize,
    seed: SeedSpec,
) -> Vec<fockfit_core::Result<CoverageExperiment>> {
    // Bootstrap replicates dominate the cost, so parallelism over
    // experiments is enough and keeps each replicate set on one thread.
    (0..n)
        .into_par_iter()
        .map(|e| coverage_experiment(truth, settings, seed.child(e as u64)))
        .collect()
}
