//! Solvers for populations of spiking neurons structured by age (time since
//! the last spike) and a leaky memory variable.
//!
//! The crate provides a time-stepped N-neuron simulator, a finite-volume
//! solver for the mean-field density equation, a stationary-state solver, and
//! numerical checks of the long-time behaviour (Lyapunov bound, Doeblin
//! minoration, exponential relaxation, weak-coupling stability).

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod particle;
pub mod pde;
pub mod quadrature;
pub mod stationary;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};
