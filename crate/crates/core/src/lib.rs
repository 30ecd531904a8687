//! Slot-level simulation of wireless networks under the SINR interference
//! model, together with synchronous and asynchronous distributed Δ+1 node
//! coloring protocols and the experiment harness used to validate them.
//!
//! Layout:
//! - [`sinr`]: geometry, communication graph, and per-slot reception.
//! - [`params`]: protocol constants and empirical calibration of λ.
//! - [`engine`]: drives per-node state machines through global time slots.
//! - [`coloring_sync`]: randomized 4Δ coloring and schedule-based reduction.
//! - [`coloring_async`]: two-level MIS color reduction for arbitrary wake-up.
//! - [`harness`]: topology generation, validators, metrics and CSV output.

pub mod coloring_async;
pub mod coloring_sync;
pub mod engine;
mod error;
pub mod harness;
pub mod params;
pub mod rng;
pub mod sinr;

pub use crate::error::{Error, Result};

/// Nodes are identified by their index `0..n` in the topology.
pub type NodeId = usize;

/// Colors are drawn from `[i] = {0, ..., i}`.
pub type Color = usize;
