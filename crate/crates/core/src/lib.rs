//! Electropermeabilization of cell membranes: a nonlinear transmission
//! problem on a single cell, its reduction to an ODE on the membrane, and a
//! dynamical homogenization scheme with a memory kernel.

pub mod cell;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod homogenization;
pub mod membrane;
pub mod mesh;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
