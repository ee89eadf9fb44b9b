//! Spectral Galerkin solver for the incompressible Navier-Stokes equations on
//! the periodic box `[0, 2π)³`, with a posteriori checks of the classical energy
//! and uniqueness estimates on computed trajectories.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command-line
//! driver live in the `gns` crate.
//!
//! Layout:
//! - [`basis`]: orthonormal divergence-free Fourier modes `φ_j` with `λ_j = |k|²`.
//! - [`field`]: coefficient states, collocation grids and L², H¹, L⁴ norms.
//! - [`nonlinear`]: the triad tensor `B_ijm` and the quadratic term.
//! - [`integrator`]: integrating-factor RK4, trajectories, Stokes oracle, refinement.
//! - [`verifier`]: energy identity, a priori bounds, interpolation inequalities,
//!   Grönwall envelope and weak residuals.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod basis;
pub mod error;
pub mod field;
pub mod integrator;
pub mod nonlinear;
pub mod transform;
mod trig;
pub mod verifier;

pub use basis::{build_basis, gram_report, polarization_pair, BasisMode, BasisSet, ModeIndex, Parity, Polarization};
pub use error::{Error, Result};
pub use field::{project_initial, to_grid, CoefficientVector, GridField, InitialCondition};
pub use integrator::{
    refine_study, replay, simulate, stokes_oracle, Diagnostics, ForcingSchedule, GalerkinSystem, Quadrature, ScenarioConfig,
    SimulationError, Trajectory,
};
pub use nonlinear::{assemble_tensor, TriadTensor};
pub use trig::BOX_VOLUME;
