//! Finite-element solver for Miura-fold surface parametrizations.
//!
//! The unknowns are the two tangent columns of the parametrization,
//! discretized with continuous piecewise quadratics and coupled to a
//! piecewise-linear multiplier field through a least-squares penalty on
//! the cross derivatives.  Newton's method drives the quasilinear system
//! with clamped coefficients, and the surface itself is recovered
//! afterwards by a mean-constrained projection of the solved gradient
//! pair.
//!
//! - [`mesh`], [`quadrature`], [`spaces`], [`sparse`] — structured
//!   (optionally periodic) triangle meshes, integration rules, dof maps
//!   and compressed-column assembly.
//! - [`forms`], [`solver`] — coefficient cut-offs, residual and
//!   derivative assembly, and the Newton driver with its bordered direct
//!   solves.
//! - [`cases`], [`recovery`], [`analysis`], [`cli`] — benchmark data
//!   generators, surface recovery, error/constraint diagnostics and the
//!   command-line front end.

pub mod analysis;
pub mod cases;
pub mod cli;
pub mod forms;
pub mod mesh;
pub mod quadrature;
pub mod recovery;
pub mod solver;
pub mod sparse;
pub mod spaces;
