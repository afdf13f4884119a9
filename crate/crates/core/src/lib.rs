//! Access point placement for small-cell uplink networks.
//!
//! The crate is `no_std` (with `alloc`) and holds the numerical machinery:
//! propagation and rate math ([`channel`]), Gaussian-mixture user populations
//! ([`scenario`]), the Lloyd solver with pluggable distortions ([`lloyd`]),
//! interference-aware placement ([`ici`]), load balancing ([`cela`]), new-user
//! association ([`association`]) and Monte Carlo metrics ([`metrics`]).
//!
//! Positions are always kilometres. The interference-aware distortions are
//! evaluated in a configurable length frame (metres by default), see
//! [`lloyd::DistortionKind`].
#![no_std]
// `!(x > 0.0)` is how parameter checks reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod association;
pub mod cela;
pub mod channel;
mod error;
pub mod ici;
pub mod lloyd;
pub mod metrics;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};

pub use association::{associate_cela, associate_min_distortion, AssociationDecision, AssociationReason};
pub use cela::{cell_thresholds, run_cela_alpha, ure, CelaPlacement, ThresholdMode, ThresholdPolicy, UreMove, UreOutcome};
pub use channel::{ChannelParams, FadingSample, LinkGains, Position};
pub use ici::{run_interap_lloyd, run_interference_lloyd, GradientStep};
pub use lloyd::{
    initial_deployment, run_lloyd, Deployment, DistortionKind, DistortionTag, Partition, Placement, SolverConfig,
    TraceRow,
};
pub use metrics::{monte_carlo_eval, EvalConfig, MetricReport};
pub use scenario::{GmmComponent, GmmSpec, Region, Scenario};
