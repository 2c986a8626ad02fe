//! Numerical laboratory for one-frequency quasiperiodic Schrodinger operators
//! and their finite-range dual operators.

pub mod arith;
pub mod bloch;
pub mod center;
pub mod cocycle;
pub mod dual;
pub mod error;
pub mod fit;
pub mod fourier;
pub mod linalg;
pub mod potential;
pub mod schrodinger;
pub mod tridiag;

pub use arith::FrequencyProfile;
pub use cocycle::{CocycleMap, LyapunovSpectrum, RotationResult};
pub use error::{Error, Result};
pub use potential::{AnalyticPotential, Potential, TrigPotential};
