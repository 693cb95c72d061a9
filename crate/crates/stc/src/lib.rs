//! Robust self-triggered sampling for uncertain nonlinear sampled-data
//! systems.
//!
//! The crate provides:
//! - plant/controller representation and deterministic fixed-step
//!   integration ([`dynamics`]),
//! - the Gronwall deviation envelope and local Lipschitz estimation
//!   ([`bounds`]),
//! - event-triggered rules and closed-form self-triggered sampling laws
//!   ([`samplers`]),
//! - verification of the sup-over-radius tuning constraints and coefficient
//!   search ([`tuning`]),
//! - closed-loop simulation with event localization ([`sim`]),
//! - performance metrics and the batch experiment protocol ([`metrics`]).

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod metrics;
pub mod samplers;
pub mod scalar_fn;
pub mod sim;
pub mod tuning;

pub use error::{Error, Result};
pub use scalar_fn::ScalarFn;
