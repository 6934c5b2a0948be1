//! Truncated Fock-space tools for three-mode parametric down-conversion with a
//! quantized pump.
//!
//! Time is measured in the scaled variable `tau = kappa t` throughout, entropies
//! use the natural log and log-negativities use log base 2.

pub mod constant_pump;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod measures;
pub mod perturbation;
pub mod special;
pub mod steady_state;

pub use error::{Error, Result};
pub use fock::{Basis, DensityMatrix, ModeLabel, PerMode, ThreeModeState, TruncationSpec, TwoModeState};
pub use num_complex::Complex64;
