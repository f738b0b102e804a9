//! Diffeomorphic matching of 3D point-cloud surfaces.
//!
//! The template shape is transported along a flow whose velocity lives in a
//! Gaussian reproducing kernel Hilbert space. Time is discretized with forward
//! Euler, the flow energy with a left Riemann sum, and the mismatch to the
//! target with a kernel distance between weighted Dirac measures. The resulting
//! constrained problem is solved with a consensus ADMM splitting:
//!
//! * a kinetic-energy subproblem, a linear KKT system solved matrix-free through
//!   its Schur complement with a block-diagonal preconditioner;
//! * a distance subproblem, solved explicitly everywhere except on data-carrying
//!   time blocks, where a Newton-Krylov method with Armijo backtracking is used;
//! * a scaled dual update.
//!
//! After registration the isotropic strain intensity of the computed map is
//! available from triangle area ratios.

pub mod admm;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod linsolve;
pub mod objective;
pub mod parallel;
pub mod strain;
pub mod synth;
pub mod trajectory;
pub mod vec3;

pub use admm::{
    register, register_multiframe, NewtonConfig, PcgSettings, RegistrationResult, SolverConfig,
    StoppingMode, Termination,
};
pub use error::{Error, Result};
pub use geometry::{hausdorff, mean_edge_length, HausdorffReport, Shape};
pub use kernels::{GaussianKernel, GramOperator};
pub use strain::{strain_field, StrainField};
pub use trajectory::{TimeGrid, Trajectory};
pub use vec3::Point;
