//! Channel estimation with an unfolded, variable-depth matching-pursuit
//! network trained online and without supervision, plus the classical
//! baselines and simulation harness used to evaluate it.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod channel;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod mpnet;
pub mod rng;

pub use error::{Error, Result};
