//! Dephasing of hyperfine qubits held in a standing-wave optical dipole trap.
//!
//! The crate is organised by physical concern:
//!
//! * [`bloch`]: Bloch-vector algebra, ideal pulse rotations, pulse programs and a
//!   damped Bloch-equation integrator.
//! * [`trap`]: light shifts, the thermal energy distribution of trapped atoms and
//!   the resulting distribution of differential light shifts.
//! * [`signal`]: closed-form Ramsey and spin-echo signals plus a Monte Carlo
//!   ensemble generator that reproduces them.
//! * [`budget`]: homogeneous dephasing mechanisms expressed as detuning
//!   fluctuation amplitudes, including the Allan-deviation pipeline.
//! * [`fitting`]: nonlinear least squares for the fringe models and the
//!   detection-statistics helpers.
//!
//! Angular frequencies are rad/s throughout; energies and temperatures are in
//! kelvin (E/k_B). Hz only appears at the CLI boundary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bloch;
pub mod budget;
pub mod constants;
mod csvio;
pub mod error;
pub mod fitting;
pub mod quad;
pub mod signal;
pub mod trap;

pub use error::{Error, Result};
