//! Mean-free periodic fields on the torus `(0, L)²` with exact spectral
//! differential operators, Leray projection and Sobolev norms.

mod field;
mod grid;
pub mod transform;

pub use field::{Field, Norm, SpectralScalar, SpectralVector, MEAN_TOLERANCE};
pub use grid::Grid;
