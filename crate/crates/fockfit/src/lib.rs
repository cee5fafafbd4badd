//! Std companion to `fockfit-core`: parallel experiment drivers, the study
//! harness, versioned JSON/CSV file formats and the `fockfit` command line.
//!
//! Parallel work runs on the current rayon pool. [`parallel::pool_from_env`]
//! builds one sized by `FOCKFIT_THREADS`; results never depend on its size.

pub mod cli;
pub mod error;
pub mod formats;
pub mod parallel;
pub mod studies;

pub use error::{Error, Result};
pub use fockfit_core as core;
