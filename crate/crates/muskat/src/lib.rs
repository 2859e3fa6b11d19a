//! Spectral contour dynamics for a fluid/vacuum interface in a porous
//! medium, driven by Darcy's law.
//!
//! The interface is a 2*pi-periodic curve carrying a vortex-sheet strength
//! that is determined implicitly by the geometry; its velocity is the
//! principal-value sheet integral plus a tangential reparametrization term
//! that keeps |dz/dalpha| uniform along the curve. On top of the evolution
//! sit the monitors this kind of computation lives and dies by: the
//! arc-chord functional, the Rayleigh-Taylor function and its minimum,
//! analyticity-strip estimates, and a conformal change of frame used to
//! probe near-self-intersecting configurations.

pub mod conformal;
pub mod curve;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod io;
#[cfg(any(test, feature = "oracles"))]
pub mod oracles;
pub mod runner;
pub mod scenarios;
pub mod singular;
pub mod spectral;
pub mod vorticity;

pub use curve::{ArcChord, PeriodicCurve, Side, StripSpec};
pub use error::{Error, Result};
pub use singular::{birkhoff_rott, br_direct_oracle, VectorField, VorticityField};
pub use vorticity::{FluidParams, SolverMode, SolverOptions};
