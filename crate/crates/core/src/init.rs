//! Initial conditions and seeded random fields.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::spectral::{Field, Grid, SpectralScalar, SpectralVector};

/// Taylor–Green vortex `a (sin x cos y, -cos x sin y)` at the fundamental wavenumber.
pub fn taylor_green(grid: Grid, amplitude: f64) -> SpectralVector {
    let s = grid.fundamental();
    SpectralVector::from_fn(
        grid,
        move |x, y| amplitude * (s * x).sin() * (s * y).cos(),
        move |x, y| -amplitude * (s * x).cos() * (s * y).sin(),
    )
}

/// Pressure `a² (cos 2x + cos 2y) / 4` balancing the Taylor–Green convective term.
pub fn taylor_green_pressure(grid: Grid, amplitude: f64) -> SpectralScalar {
    let s = grid.fundamental();
    let a2 = amplitude * amplitude;
    SpectralScalar::from_fn(grid, move |x, y| {
        0.25 * a2 * ((2.0 * s * x).cos() + (2.0 * s * y).cos())
    })
    .without_mean()
}

/// Random real scalar with coefficient standard deviation `(1 + |κ|²)^{-decay/2}`
/// on all resolved nonzero modes.
pub fn random_scalar(grid: Grid, seed: u64, decay: f64) -> SpectralScalar {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![Complex64::default(); grid.size()];
    for (idx, c) in coeffs.iter_mut().enumerate() {
        if idx == 0 || grid.is_nyquist(idx) {
            continue;
        }
        let sd = (1.0 + grid.kappa_sq(idx)).powf(-0.5 * decay);
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *c = Complex64::new(re, im) * sd;
    }
    SpectralScalar::from_coeffs(grid, coeffs).expect("sized by construction")
}

/// Random (generally compressible) vector field.
pub fn random_vector(grid: Grid, seed: u64, decay: f64) -> SpectralVector {
    SpectralVector::new(
        random_scalar(grid, seed, decay),
        random_scalar(grid, seed ^ 0x9e37_79b9_7f4a_7c15, decay),
    )
    .expect("same grid")
}

/// Random divergence-free field with prescribed `L²` norm, built as the
/// perpendicular gradient of a random stream function.
pub fn random_solenoidal(grid: Grid, seed: u64, decay: f64, l2_norm: f64) -> SpectralVector {
    let psi = random_scalar(grid, seed, decay + 2.0);
    let [dx, dy] = psi.gradient().into_components();
    let u = SpectralVector::new(dy, dx.scale(-1.0)).expect("same grid");
    let n = u.l2();
    if n == 0.0 {
        u
    } else {
        u.scale(l2_norm / n)
    }
}
