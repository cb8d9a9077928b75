//! On-line policy iteration for deterministic finite-horizon optimal
//! control.

pub mod drone;
pub mod error;
pub mod exact;
pub mod generators;
pub mod graph;
pub mod mda;
pub mod model;
pub mod online;
pub mod par;
pub mod rng;

pub use error::{Error, Result};
