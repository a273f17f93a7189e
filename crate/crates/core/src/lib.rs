//! Conical-singularity asymptotics and parabolic solvers on straight model cones.
//!
//! The cross-section spectrum drives everything: [`indicial`] turns it into
//! root sets and parameter windows, [`conesolve`] evolves fields mode by mode
//! on a graded radial mesh, [`meshnorm`] measures and fits near-tip behaviour,
//! and [`freezeflow`] splits trajectories into a frozen-coefficient flow plus
//! a remainder.

// Negated comparisons below are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod conesolve;
pub mod error;
pub mod freezeflow;
pub mod linalg;
pub mod meshnorm;
pub mod indicial;
pub mod spectrum;

pub use error::{ConeError, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
