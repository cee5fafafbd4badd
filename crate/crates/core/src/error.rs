use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(&'static str),
    #[error("quadrature variances ({vq}, {vp}) violate {reason}")]
    InvalidVariances {
        vq: f64,
        vp: f64,
        reason: &'static str,
    },
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityDomain(f64),
    #[error("alpha = {0} must lie in (0, 0.5)")]
    InvalidAlpha(f64),
    #[error("n_max = {0} outside the supported range 1..=64")]
    InvalidNMax(usize),
    #[error("histogram is inconsistent: {0}")]
    InvalidHistogram(&'static str),
    #[error("prior shape parameters must be positive (nu = {nu}, eta = {eta})")]
    InvalidPrior { nu: f64, eta: f64 },
    #[error("weight vector has {got} entries, expected {expected}")]
    WeightLength { expected: usize, got: usize },
    #[error("distribution is invalid: {0}")]
    InvalidDistribution(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("fit did not converge")]
    NotConverged,
    #[error("{failed} of {total} bootstrap refits failed to converge (limit 1%)")]
    TooManyFailedRefits { failed: usize, total: usize },
}
