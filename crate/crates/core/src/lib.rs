//! Spin-dependent Kapitza-Dirac diffraction of electrons in an X-ray
//! standing light wave: kinematics, free spinors, mode-space propagation of the
//! Dirac, Klein-Gordon and Pauli equations, closed-form theory and analysis.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod kinematics;
pub mod spinors;
pub mod theory;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
