//! Finite-time hyperbolicity for surface diffeomorphisms.
//!
//! Bottom-up: [`dynamics`] defines the maps, [`cocycle`] the factored
//! Jacobian products and their splittings, [`hypersets`] the finite-time
//! hyperbolic sets and their combinatorics, [`rectangles`] finite-time
//! manifolds and admissible charts, [`entropy`] Bowen-ball estimators, and
//! [`cover`] the subdivide/saturate/cut cover of a Bowen ball. [`cli`] wires
//! everything to JSON/CSV reports.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod cocycle;
pub mod cover;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod hypersets;
pub mod linalg;
pub mod rectangles;

pub use error::{Error, Result};
pub use linalg::{Mat2, Point2, Vec2};
