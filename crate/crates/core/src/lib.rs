//! Locally linear embedding (LLE) matrices on sampled manifolds with
//! boundary, their spectra, and the closed-form boundary coefficients they
//! approximate.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod boundary;
pub mod error;
pub mod io;
pub mod lle_core;
pub mod neighbors;
pub mod quadrature;
pub mod rng;
pub mod samplers;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
