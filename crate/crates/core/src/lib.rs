//! Numerical toolkit for equilibration of a small system coupled to a finite
//! bath: Hilbert-space primitives, Haar sampling, exact diagonalization,
//! time-averaged reduced states, the equilibration bounds and model builders.

pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod matrix_file;
pub mod models;
pub mod sampling;
pub mod spectral;
pub mod theorems;
pub mod tolerances;

pub use error::{Error, Result};
pub use tolerances::Tolerances;

/// Version tag written into every serialized report.
pub const SCHEMA_VERSION: u32 = 1;
