//! Pseudo-spectral penalty–projection solver and Monte Carlo harness for the
//! stochastic incompressible Navier–Stokes equations on the 2D torus.

pub mod error;
pub mod experiments;
pub mod init;
pub mod noise;
pub mod nonlinear;
pub mod schemes;
pub mod snapshot;
pub mod spectral;

pub use error::{Error, Result};
