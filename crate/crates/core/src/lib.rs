//! Semi-implicit parametric finite elements for curve shortening flow with a
//! field-dependent forcing, coupled to a diffusion equation for a conserved
//! scalar field living on the evolving closed curve.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`]: periodic parameter grid on `[0, 1)`.
//! * [`geometry`]: polygon quantities (segment lengths, tangents, normals,
//!   averaged normals) and the semi-discrete node equations.
//! * [`cyclic`]: direct solver for symmetric periodic tridiagonal systems.
//! * [`problems`]: forcing functions, initial data, manufactured solutions
//!   and the radially symmetric ODE reference.
//! * [`scheme`]: the fully discrete stepper (position solve, field solve,
//!   segment-length guard).
//! * [`analysis`]: error functionals, EOCs and convergence studies.
//! * [`validation`]: independent oracles (finite-difference PDE residuals,
//!   weak-form cross-check, linear-system audits).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod cyclic;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod scheme;
pub mod validation;

pub use error::{Error, Result};
pub use geometry::Vec2;
