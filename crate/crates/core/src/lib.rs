//! Spiking-network simulation with sleep-phase homeostatic regularization.
//!
//! Two models share one sleep operator: a recurrent excitatory/inhibitory
//! network trained by local STDP/iSTDP rules, and a feedforward
//! surrogate-gradient baseline trained by backpropagation through time.
//! Periodic hard-pause sleep phases suppress input, let intrinsic noise drive
//! spontaneous activity, and decay every plastic weight toward a target
//! magnitude until a weight-sum wake condition fires.
//!
//! - [`neuron`] — leaky integrate-and-fire dynamics with adaptive thresholds
//! - [`plasticity`] — sparse synapse groups, STDP/iSTDP, sign-clamping
//! - [`sleep`] — budgets, power-law decay, wake condition, onset schedule
//! - [`network`] — the assembled three-population recurrent model
//! - [`encoding`] — Poisson rate coding and image resizing
//! - [`datasets`] — IDX files, the geometric toy set, balanced splits
//! - [`readout`] — rates, standardization, PCA, multinomial regression
//! - [`sg`] — the surrogate-gradient model, Adam, checkpoints
//! - [`config`] / [`harness`] — experiment configs, runs, sweeps, summaries

// Validation uses negated comparisons (`!(x > 0.0)`) so NaN fails the check;
// index loops over several parallel arrays stay as index loops.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::field_reassign_with_default)]

pub mod config;
pub mod datasets;
pub mod encoding;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod network;
pub mod neuron;
pub mod plasticity;
pub mod readout;
pub mod rng;
pub mod sg;
pub mod sleep;

pub use config::{DatasetKind, ExperimentConfig, ModelKind, SLEEP_RATIO_GRID};
pub use error::{Error, Result};
pub use harness::{
    run_experiment, run_sg_experiment, run_stdp_experiment, summarize, sweep, RunRecord, SweepGrid,
};
pub use network::StdpNetwork;
