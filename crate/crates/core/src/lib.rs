//! Cycle-level, trace-driven simulator of a multi-core DRAM memory system
//! with a family of refresh scheduling mechanisms.
//!
//! The crate is organized bottom-up:
//!
//! * [`dram`] holds the device model: organization, timing derivation,
//!   command legality, and the offline command/retention checkers.
//! * [`refresh`] holds the refresh policies (all-bank, per-bank round robin,
//!   elastic, DARP/DSARP with write-refresh parallelization, FGR).
//! * [`controller`] is the per-channel FR-FCFS controller with write
//!   batching and subarray-conflict filtering.
//! * [`cpu`] is the trace-driven core front end and the synthetic trace
//!   generator.
//! * [`metrics`] and [`energy`] turn run statistics into weighted speedup,
//!   fairness metrics and energy per access.
//! * [`config`], [`sim`] and [`experiment`] wire everything into single runs,
//!   policy matrices and parameter sweeps.

pub mod config;
pub mod controller;
pub mod cpu;
pub mod dram;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod refresh;
pub mod sim;

pub use error::{Error, Result};

/// Controller clock cycle index.
pub type Cycle = u64;
