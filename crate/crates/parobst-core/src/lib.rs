//! Numerical laboratory for the parabolic no-sign obstacle problem
//! `Hu = Δu - ∂u/∂t = f·χ_{u≠0}` on backward space-time cylinders.
//!
//! The crate solves the free boundary problem with an active-set
//! finite-difference scheme and measures the regularity diagnostics that
//! classify free boundary points: caloric-polynomial projections, coincidence
//! set density decay, the w/g decomposition with its dyadic telescope, and
//! Gaussian-weighted scaling energies.
//!
//! All numerics are generic over the floating point type through [`Scalar`];
//! the `*64` aliases below cover the common case.

pub mod acceptance;
pub mod calculus;
pub mod curve;
pub mod decomposition;
pub mod error;
pub mod exact;
pub mod field;
pub mod grid;
pub mod heat;
mod linalg;
pub mod obstacle;
pub mod projection;
pub mod scalar;
pub mod weiss;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// f64 grid.
pub type Grid64 = grid::SpaceTimeGrid<f64>;
/// f64 cylinder.
pub type Cylinder64 = grid::Cylinder<f64>;
/// f64 field.
pub type Field64 = field::ScalarField<f64>;
/// f64 diagnostic curve.
pub type Curve64 = curve::DiagnosticCurve<f64>;
