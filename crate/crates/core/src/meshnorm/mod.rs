//! Graded radial meshes, fields on the model cone, discrete Mellin-Sobolev
//! norms, and near-tip exponent fits.

mod field;
mod fit;
mod mesh;
mod norm;

pub use field::{basis, cross_norms, sup_abs, zonal_values, AngularQuadrature, Component, ConeField, Harmonic};
pub use fit::{fit_exponent, tip_limit, FitReport, MIN_WINDOW_NODES, NOISE_FLOOR};
pub use mesh::{Grading, RadialMesh, DEFAULT_X0};
pub use norm::{
    decay_bound_check, log_derivative, mellin_norm, mellin_norm_on, trapezoid_on, weighted_lp, Cutoff, DecayCheck,
    MellinNorm, DIVERGENCE_SLOPE,
};
