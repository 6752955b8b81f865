//! Dispersive Boussinesq waves over variable topography: forward solver,
//! Green's-function oracle, adjoint gradients and Tikhonov-regularized
//! reconstruction of the topography coefficient from final-time data.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, randomness and
//! the command line live in the `boussinesq-harness` crate.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adjoint;
mod error;
pub mod fem;
pub mod field;
pub mod forward;
pub mod green;
pub mod linalg;
mod math;
pub mod mesh;
pub mod objective;
pub mod optim;
pub mod params;
pub mod presets;

pub use error::{Error, Result};
pub use field::{ScalarField, Trajectory, WaveState};
pub use mesh::{SpatialMesh, TimeGrid};
pub use params::{AdmissibleSet, EnergyConstants, ModelParams};
