//! Experiment orchestration for `smallcell-core`: JSON configs, the
//! algorithm fan-out with shared initialization, artifact files, and the
//! invariant battery behind `smallcell validate`.

// `!(x > 0.0)` is how parameter checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod error;
pub mod experiment;
pub mod io;
pub mod validate;

pub use config::{AlgorithmSpec, ExperimentConfig, MetricName};
pub use error::HarnessError;
pub use experiment::{run_experiment, ExperimentReport};
