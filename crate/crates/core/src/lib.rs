//! Squeezing and temperature estimation for single-mode squeezed thermal
//! states from Fock-state count histograms.
//!
//! The crate is `no_std` (it needs `alloc`) and contains the numerical core:
//!
//! * [`numerics`]: scaled Legendre recurrence and the standard normal CDF/quantile.
//! * [`model`]: state parameterizations, the Fock distribution, a Wigner-overlap
//!   quadrature cross-check, and Gaussian-state fidelity.
//! * [`estimation`]: count-derived weights, the weighted least-squares objective
//!   and the constrained two-stage fit.
//! * [`sampling`]: seeded multinomial simulation of Fock histograms.
//! * [`bootstrap`]: parametric bootstrap replicates, percentile and
//!   bias-corrected intervals, and coverage experiments.
//!
//! IO, file formats, parallel drivers and the command-line front end live in
//! the `fockfit` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bootstrap;
pub mod error;
pub mod estimation;
pub mod model;
pub mod numerics;
pub mod sampling;

pub use error::{Error, Result};
