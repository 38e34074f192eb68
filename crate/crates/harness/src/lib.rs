//! Experiment harness for `lle-toolkit`: presets, runners and CSV output.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod runners;

pub use config::{ExperimentConfig, FTest};
