//! Simulation and fitting toolkit for NV-center double electron-electron
//! resonance (DEER) detection of paramagnetic target spins.
//!
//! The crate covers the whole chain from geometry to fitted parameters:
//!
//! * [`geometry`]: vectors, Rodrigues rotations and the dipolar field a target
//!   spin produces at the sensor.
//! * [`deer`]: single-target DEER signals by deterministic quadrature (with a
//!   Monte Carlo cross-check) and the closed-form ensemble signal.
//! * [`spin`]: spin Hamiltonians for an S=1/2 electron coupled to a nuclear
//!   spin, a Hermitian Jacobi eigensolver and EPR transition spectra.
//! * [`fit`]: dip lineshapes, least-squares lineshape fits and chi-squared
//!   grid fits of field magnitude and orientation.
//! * [`sensing`]: prefactor scaling with distance, accumulated ensemble
//!   coupling over a sample and sensing-volume estimates.
//! * [`cli`]: the JSON-configured command-line front end.
//!
//! Units throughout: frequencies in MHz (ordinary, not angular), times in µs,
//! magnetic fields in Gauss, distances in nm. Factors of 2π are applied
//! internally.

pub mod cli;
pub mod constants;
pub mod deer;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod quadrature;
pub mod rng;
pub mod sensing;
pub mod spin;
pub mod table;

pub use error::{Error, Result};
