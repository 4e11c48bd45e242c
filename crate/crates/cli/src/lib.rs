//! Configuration, orchestration and report emission for the `randtherm`
//! experiments. The binary in `main.rs` is a thin wrapper over [`pipeline::run`].

// Parameter checks are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod pipeline;

pub use config::{ConfigError, ExperimentConfig};
pub use pipeline::{exit_code, run, Command, HypothesisFailure, RunOptions, RunOutcome};
