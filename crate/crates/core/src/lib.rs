//! Monotonicity-based shape reconstruction for electrical impedance
//! tomography with the complete electrode model on the unit disk.
//!
//! The crate provides the full pipeline: structured disk meshes with
//! electrode-aligned boundaries ([`mesh`]), a P1 forward solver producing
//! the electrode measurement map and its conductivity derivative
//! ([`fem`]), a discretized current-density model and the boundary
//! projection operators that connect the two ([`cm_bridge`]), the dense
//! spectral helpers ([`spectral`]), the reconstruction algorithms and the
//! model-refinement experiment ([`monotonicity`]), and phantoms plus the
//! seeded noise model ([`synthdata`]).
//!
//! The data-parallel inner loops run on rayon when the `parallel` feature
//! (default) is enabled and fall back to sequential iteration otherwise;
//! both paths produce bitwise-identical results.

pub mod cm_bridge;
pub mod error;
pub mod exec;
pub mod fem;
pub mod linsys;
pub mod mesh;
pub mod monotonicity;
pub mod selftest;
pub mod spectral;
pub mod synthdata;

pub use error::{Error, Result};
