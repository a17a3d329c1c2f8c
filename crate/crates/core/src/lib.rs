//! Infinitely divisible laws with polynomially decaying characteristic
//! functions: evaluation, decay certification, density inversion,
//! spectral deconvolution and Besov multiplier checks.

pub mod error;
pub mod levy;
pub mod quad;
pub mod catalog;
pub mod decay;
pub mod grid;
pub mod inversion;
pub mod measure;
pub mod deconv;
pub mod besov;
pub mod cli;
pub mod sample;

pub use error::{IddError, Result};
pub use levy::{CharFn, JumpMeasure, LevyTriplet, QuadConfig};
