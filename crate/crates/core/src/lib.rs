//! Occlusion-free image-based visual servoing.
//!
//! The crate is `no_std` (with `alloc`) and holds the numerical core:
//!
//! - [`geometry`]: pinhole projection, SE(3) camera pose, spherical obstacle.
//! - [`jacobians`]: interaction matrices of features, obstacle center and radius.
//! - [`ibvs`]: feature error and the gradient IBVS law.
//! - [`mpc`]: condensed horizon planner for the feature error.
//! - [`barrier`]: barrier certificates, deterministic and probabilistic.
//! - [`solvers`]: minimal-deviation safety filters and their certification.
//!
//! Enable the `std` feature to get `std::error::Error` impls through the
//! dependencies.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod barrier;
pub mod error;
pub mod geometry;
pub mod ibvs;
pub mod jacobians;
pub mod mpc;
pub mod observation;
pub mod solvers;

pub use error::{Error, Result};
pub use ibvs::Twist6;
