//! Deterministic simulator of decentralized ("swarm") learning with a
//! membership-inference attack suite and training-time defenses.
//!
//! The pipeline is split -> swarm training -> attack -> evaluation, driven
//! end to end by [`harness::run_scenario`] from a single JSON scenario.

pub mod attacks;
pub mod data;
pub mod defenses;
pub mod error;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod swarm;

pub use error::{Error, Result};
