//! Pseudospectral simulation and verification toolkit for coupled cubic
//! derivative nonlinear Schrodinger systems with multiple mass parameters.
//!
//! The crate is organized in layers:
//! - [`grid`]: periodic grid, continuum-normalized transforms, dealiasing,
//!   norms, off-grid sampling;
//! - [`operators`]: free evolution and its gauge/dilation/lens factorization,
//!   the vector fields, Hilbert transform, smoothing gauge, and algebraic
//!   identity residuals;
//! - [`system`]: the coefficient-tensor system model, builders, resonance
//!   classification, and nonlinearity evaluation;
//! - [`solver`]: integrating-factor RK4 time stepping with runtime
//!   diagnostics;
//! - [`asymptotics`]: profile extraction, scattering states, decay fits, the
//!   reduced large-time model, and the resonant-case monitors;
//! - [`protocols`]: canned experiment drivers with pinned thresholds, shared
//!   by the acceptance suite and the command-line demos.

pub mod asymptotics;
pub mod error;
pub mod grid;
pub mod operators;
pub mod protocols;
pub mod solver;
pub mod system;

pub use error::{CoreError, Result};
pub use grid::{Field, Norms, SpatialGrid, Spectrum, C64};
pub use operators::{Mass, WeightFunction};
pub use system::{
    build_nls2, build_nls3, build_single_cubic, classify, CubicTerm, ResonanceReport,
    SolutionState, SystemKind, SystemSpec,
};
