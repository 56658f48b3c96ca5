//! Adaptive wavelet-Galerkin solver for transient heat conduction in
//! two-dimensional composite materials.

pub mod adaptivity;
pub mod assembly;
pub mod cli;
pub mod mra;
pub mod problem;
pub mod reference;
pub mod timestepper;
