//! Thermodynamic formalism for random circle maps: skew products driven by a
//! Bernoulli shift, their fiberwise transfer operators, Hilbert-metric cones,
//! equilibrium states and the numerical experiments built on them.

// Parameter checks are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod base;
pub mod error;
pub mod fiber;
pub mod grid;
pub mod hypotheses;
pub mod io;
pub mod thermo;
pub mod transfer;
pub mod ulam;

pub use error::{Error, Result};
