//! Spectral toolkit for the three-dimensional elastic wave equation with
//! viscoelastic damping.

pub mod asymptotics;
pub mod audit;
pub mod elastic;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod harness;
pub mod kernels;
pub mod nonlinear;
pub mod norms;
pub mod oracle;
pub mod radial;
pub mod symbols;

pub use error::{Error, Result};
