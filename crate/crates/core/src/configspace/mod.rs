//! System specification, configuration-space grids, wave fields, the
//! Hamiltonian and the marginalization primitive.

mod grid;
mod hamiltonian;
mod marginal;
pub mod persist;
mod spec;
mod symmetrize;
mod wave;

pub use grid::{build_grid, AxisOwner, AxisSpec, Grid, CAP_FLAG, DEFAULT_POINT_CAP, MIN_AXIS_POINTS};
pub use hamiltonian::{apply_hamiltonian, potential_energy, time_derivative};
pub(crate) use hamiltonian::dist_sq;
pub use marginal::marginalize;
pub use spec::{PairPotentialSpec, PotentialKind, SortSpec, Statistics, SystemSpec, MAX_CONFIG_DIM};
pub use symmetrize::{permutations, symmetrize, Orbital};
pub use wave::{sample, MadelungView, WaveField, BOUNDARY_RATIO};
