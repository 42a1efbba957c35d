//! Multiplicative free and Boolean convolution of probability measures on the
//! unit circle and on the positive half-line.
//!
//! Measures are stored as atoms plus a piecewise-linear density on a grid. Every
//! transform is evaluated through exact integration of that representation, the
//! convolution machinery is driven by subordination functions, and densities
//! come back out through Stieltjes or Poisson boundary limits.

// Negated comparisons are used so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brownian;
pub mod config;
pub mod convolution;
pub mod entropy;
pub mod error;
pub mod experiments;
mod kernel;
pub mod levy;
pub mod measure;
pub mod recovery;
pub mod special;
pub mod subordination;
pub mod transforms;

pub use error::{Error, Result};
pub use measure::{Atom, Density, DensityProfile, Measure, Space};
pub use transforms::EtaEvaluator;

/// Complex numbers used throughout the crate.
pub type C64 = num_complex::Complex64;
