//! Optomechanical readout of doubly clamped microtubule vibrations.
//!
//! The crate is organised the way the physics flows:
//!
//! - [`beam`]: clamped-clamped Euler-Bernoulli eigenmodes, effective masses
//!   and zero-point amplitudes.
//! - [`drive`]: electrostatic tip-electrode potential and its projection onto
//!   a beam mode, plus the static/harmonic force split.
//! - [`cavity`]: evanescent whispering-gallery coupling rate, intracavity
//!   photon number and the static equilibrium shift.
//! - [`response`]: analytic first-order sideband amplitudes and the probe
//!   transmission spectrum, with sweeps and the spectrum file formats.
//! - [`oracle`]: brute-force time-domain integration of the mean-field
//!   equations, used to check [`response`].
//! - [`fit`]: recovery of mechanical parameters from measured spectra.
//! - [`config`]: JSON run configuration, presets and parameter resolution.
//!
//! All quantities are SI; angular frequencies and rates are in rad/s.

pub mod beam;
pub mod cavity;
pub mod config;
pub mod constants;
pub mod drive;
pub mod error;
pub mod fit;
pub mod numerics;
pub mod oracle;
pub mod response;

pub use constants::PhysicalConstants;
pub use error::{Error, Result};
pub use num_complex::Complex64;
