//! Host–vector epidemic toolkit: compartmental ODE models of a mosquito-borne
//! infection with four vaccination schemes, reproduction-number analysis with
//! eradication thresholds, and a vaccination optimal-control solver (indirect
//! forward–backward sweep and direct piecewise-constant transcription).

// Validation deliberately writes `!(v > 0.0)` instead of `v <= 0.0`: the
// negated form also rejects NaN, which must never pass a positivity check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod io;
pub mod models;
pub mod ode;
pub mod reproduction;

pub use error::{Error, Result};
