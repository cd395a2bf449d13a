//! Parallel Bayesian congestion games under public signalling.
//!
//! - [`game`]: networks, polynomial latencies, total latency, demand scaling.
//! - [`solver`]: Nash and optimal flows by monotone level search.
//! - [`belief`]: priors, partition policies, posterior means.
//! - [`analysis`]: expected latency under a policy, signal-aware tolls,
//!   benefit of signalling and its bounds.
//! - [`experiment`]: config files, batch runs and CSV output.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod belief;
pub mod error;
pub mod experiment;
pub mod game;
pub mod solver;

pub use error::{Error, Result};
