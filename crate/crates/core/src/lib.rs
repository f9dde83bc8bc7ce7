//! Core numerics for evaluating visualisations of Bayesian models.
//!
//! - [`samples`]: Monte Carlo joint-sample store, query computations, conditioning
//!   by bootstrap resampling and the binary blob format.
//! - [`cafe`]: the hierarchical peak/off-peak queuing model, its HMC sampler and
//!   posterior-predictive export.
//! - [`scoring`]: MultiBet state machine, divergences, expected utility, rewards and
//!   response evaluation.
//! - [`task`]: the task description shared between scoring, the study protocol and
//!   analysis.
//! - [`analysis`]: response tables, simulated agents, rank tests and effect sizes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cafe;
pub mod distribution;
pub mod samples;
pub mod scoring;
pub mod stats;
pub mod task;

pub use distribution::CategoricalDistribution;
pub use samples::{JointSamples, Observability, VariableSpec};
