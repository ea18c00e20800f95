//! Probabilistic certification toolkit for learned reach-avoid policies.
//!
//! The stack has three layers: an offline coarse global certificate built by
//! scenario optimization over a covering of nominal states, an online local
//! safe-set growth loop around the certified boundary, and a four-tier
//! switching controller that prefers certified control and falls back to
//! sampling-based recovery. A two-drone racing system exercises the full
//! stack; a low-dimensional double integrator with an exhaustive oracle
//! validates the probabilistic guarantees end to end.

pub mod cbf;
pub mod config;
pub mod controllers;
pub mod domain;
pub mod error;
pub mod global;
pub mod harness;
pub mod hierarchy;
pub mod local;
pub mod measure;
pub mod mppi;
pub mod reduction;
pub mod scenario;
pub mod spatial;
pub mod systems;

pub use error::{Error, Result};
