//! Very-weak Stokes laboratory on the unit square.
//!
//! The crate discretizes Ω = (0,1)² with a uniform MAC (staggered) grid and
//! provides:
//!
//! * stationary Stokes solvers for body-force problems and for pure
//!   Dirichlet data that may be discontinuous (the lid-driven cavity),
//! * the regularized cavity data `g_ε` and its corner variants,
//! * the adjoint/transposition identity and the `L²(Γ) → L²(Ω)` estimate,
//! * discrete trace operators, a tangential lifting and the generalized
//!   Stokes pairing,
//! * a stream-function (biharmonic) cross-check,
//! * the time-dependent problem with its backward adjoint and space-time
//!   pairing.
//!
//! Everything works on plain `f64` fields stored in [`ndarray`] arrays.

pub mod biharmonic;
pub mod boundary_data;
pub mod error;
pub mod evolution;
pub mod mesh;
pub mod operators;
pub mod stokes;
pub mod traces;
pub mod transposition;

pub use boundary_data::{BoundaryData, Corner, Side};
pub use error::{Result, VwsError};
pub use mesh::{PressureField, StaggeredGrid, VelocityField};
pub use stokes::{SolverOptions, StokesSolution};
