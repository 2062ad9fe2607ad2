//! Continuous summation-by-parts discretization of the Laplacian on
//! curvilinear multiblock quadrilateral meshes, built from Gauss-Lobatto SBP
//! operators, and an energy-stable acoustic wave solver on top of it.
//!
//! The pipeline is:
//!
//! 1. [`sbp1d`]: 1D operators on Gauss-Lobatto nodes.
//! 2. [`mesh`]: curved quadrilateral blocks with explicit interfaces.
//! 3. [`geometry`]: per-block metric terms, Laplacian and boundary operators.
//! 4. [`assembly`]: the embedding that removes duplicated interface nodes,
//!    interface penalties, and the reduced global operators.
//! 5. [`wave`]: boundary conditions, point source, RK4 time stepping.
//! 6. [`analytic`]: the free-space point-source solution used for errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod assembly;
mod error;
pub mod experiment;
pub mod geometry;
pub mod mesh;
pub mod sbp1d;
pub mod sparse;
pub mod verify;
pub mod wave;

pub use error::{Error, Result};
