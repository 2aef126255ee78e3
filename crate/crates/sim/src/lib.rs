//! Closed-loop simulation of occlusion-free visual servoing.
//!
//! Scenarios are TOML files ([`scenario`]). A trial ([`engine::run`])
//! repeatedly observes the features with seeded pixel noise, plans with the
//! horizon controller, passes the first planned twist through the barrier
//! filter of the selected mode and integrates the camera pose. Logs export
//! to CSV and JSON ([`export`]); [`sweep`] repeats trials over obstacle
//! start locations in parallel; [`oracle`] holds the numerical cross-checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod export;
pub mod oracle;
pub mod rng;
pub mod scenario;
pub mod sweep;

pub use engine::{run, TrajectoryLog};
pub use error::SimError;
pub use scenario::{load, Mode, Scenario, ScenarioSpec};
