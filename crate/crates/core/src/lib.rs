//! Many-particle quantum hydrodynamics on configuration-space grids.
//!
//! From a discretized multi-sort wave function the crate computes densities,
//! currents and velocities, the Kuzmenkov and Wyatt momentum-flow and pressure
//! tensors with their splits, force densities, and the residuals of the
//! continuity, Ehrenfest and quantum Cauchy balance laws. A cylindrical
//! module handles azimuthally symmetric states.

pub mod balance;
pub mod configspace;
pub mod cylindrical;
pub mod error;
pub mod hydro;
pub mod mask;
pub mod report;
pub mod scenarios;
pub mod stencil;
pub mod tensors;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
