//! Experiment driver for `robust-policy`: configuration, demo persistence,
//! α-sweeps, tracking runs and certificate reports.

// `!(x > 0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod demos;
pub mod error;
pub mod output;
pub mod report;
pub mod sweep;

pub use config::{load_config, Experiment, ExperimentConfig, Overrides};
pub use error::{BenchError, Result};
