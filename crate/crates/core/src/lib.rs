//! Numerical core: wavefunction propagation on periodic grids, the Madelung
//! hydrodynamic decomposition, Bohm and stochastic trajectories, and the
//! diagnostics that compare them.

pub mod diagnostics;
pub mod error;
pub mod field_io;
pub mod grid;
pub mod madelung;
pub mod spectral;
pub mod tdse;
pub mod trajectories;
pub mod units;

pub use error::{Error, Result};
pub use grid::{make_grid, ComplexField, Grid, RealField};
pub use madelung::{MadelungFields, NodeSet, VelocityField};
pub use tdse::{InitialState, Potential, PotentialSpec, Timeline};
pub use trajectories::{Trajectory, TrajectoryEnsemble, TrajectoryKind};
pub use units::Units;

pub use num_complex::Complex64;
