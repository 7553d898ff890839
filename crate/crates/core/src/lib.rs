//! Simulation toolkit for differential-phase-shift measurement-device-independent QKD
//! over three time bins.

pub mod bessel;
pub mod error;
pub mod hom;
pub mod integrate;
pub mod keyrate;
pub mod mc;
pub mod optics;
pub mod oracle;
pub mod sifting;

pub use error::{Error, Result};
