//! Offline GUI-agent factory.
//!
//! The crate is organised as the stages of a closed loop:
//!
//! * [`sitegen`] synthesizes seeded, versioned site bundles (pages, elements,
//!   navigation graph, data snapshot, canonical flows).
//! * [`env`] is a deterministic simulator that applies structured actions to a
//!   bundle and emits structured observations and replay hashes.
//! * [`taskfactory`] instantiates templates against a bundle, validates the
//!   candidates and attaches shortest gold paths.
//! * [`rewards`] parses model responses and scores them with the format +
//!   hierarchical accuracy reward.
//! * [`collect`] runs executors, filters trajectories and builds the replay buffer.
//! * [`train`] optimizes a linear softmax policy with group-normalized advantages,
//!   ratio clipping and a KL penalty.
//! * [`eval`] computes completion, efficiency and step-level metrics.
//! * [`pipeline`] chains all stages through on-disk artifacts.

pub mod collect;
pub mod env;
pub mod error;
pub mod eval;
pub mod hash;
pub mod jsonl;
pub mod pipeline;
pub mod rewards;
pub mod sitegen;
pub mod taskfactory;
pub mod train;

pub use error::{Error, Result};
