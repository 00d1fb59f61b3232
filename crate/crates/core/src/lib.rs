//! Relay placement along a line under log-normal shadowing and Rayleigh fading.
//!
//! * [`channel`]: outage model, shadowing sampler and expectation engine.
//! * [`acoe`]: exact average-cost solver, thresholds, horizon selection and
//!   renewal-reward metrics.
//! * [`policy`]: the stationary threshold rule applied to measured links.
//! * [`simulator`]: the as-you-go walk, traces and the Monte-Carlo driver.
//! * [`learning`] and [`adaptive`]: online learners for fixed multipliers and
//!   for outage/relay-density constraints.
//! * [`experiment`]: the named experiment cases.

pub mod acoe;
pub mod channel;
pub mod adaptive;
pub mod error;
pub mod experiment;
pub mod learning;
pub mod policy;
pub mod simulator;

pub use error::{Error, Result};
