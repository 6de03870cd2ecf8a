//! High-order discontinuous Galerkin methods for the first-order acoustic
//! wave system on moving curved meshes.
//!
//! The library maps the time-dependent physical domain onto a fixed reference
//! domain (an arbitrary Lagrangian-Eulerian transformation), evolves the
//! J-scaled fields together with the mapping Jacobian, and recovers primal
//! fields either by solving weighted mass systems (`Scheme::Dg`) or through
//! the low-storage weight-adjusted inverse (`Scheme::Wadg`). A skew-symmetric
//! formulation with central or penalty interface fluxes keeps the
//! semi-discrete scheme energy conservative or provably dissipative.
//!
//! See the `book/` guide for worked examples; the `alewadg` binary drives the
//! batch studies described there.

pub mod error;
pub mod quadrature;
pub mod geometry;
pub mod mesh;
pub mod motion;
pub mod ref_element;
pub mod spline;

pub use error::{Error, Result};
