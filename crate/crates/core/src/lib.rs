//! Spectral engine for the reduced two-channel Born-Oppenheimer operator of a
//! one-electron diatomic in a coaxial Stark field: channel potentials, finite
//! difference realizations, windowed eigensolvers, exterior complex scaling,
//! effective-channel and Grushin reductions, and the theorem-level checks.

pub mod analysis;
pub mod config;
pub mod defaults;
pub mod discretize;
pub mod eigensolve;
pub mod error;
pub mod model;
pub mod reduction;
pub mod scan;
pub mod setup;
pub mod verify;

pub use error::{Error, Result};
