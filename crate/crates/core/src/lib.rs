//! Secure short-packet relaying through a UAV.
//!
//! The crate evaluates finite-blocklength secrecy throughput for an
//! Alice → UAV relay → Bob link observed by a passive eavesdropper, and
//! jointly optimizes the per-slot coding blocklengths and the UAV flight
//! path with block successive convex approximation.
//!
//! Module map:
//! - [`scenario`]: physical constants, geometry, channel gains and SNRs.
//! - [`fbl`]: dispersion, `Q⁻¹`, secrecy rates, per-slot throughput, EAST.
//! - [`blocklength`]: exact per-slot uplink/downlink split search.
//! - [`sca`]: convex trajectory subproblem around a local point.
//! - [`solver`]: log-barrier interior-point solver for that subproblem.
//! - [`bsca`]: the alternating outer loop and the benchmark schemes.
//! - [`cli`]: scenario files, experiment orchestration and artifacts.

// `!(x > 0.0)` is used on purpose so that NaN fails the guard.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocklength;
pub mod bsca;
pub mod cli;
pub mod error;
pub mod fbl;
pub mod sca;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use scenario::{Link, Point, Scenario, ScenarioParams, Trajectory};
