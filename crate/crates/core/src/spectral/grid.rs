use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Square periodic domain (0, L)² resolved with `N` Fourier modes per direction.
///
/// Coefficients are stored in FFT order: storage index `i` maps to the
/// wavenumber `i` for `i < N/2` and `i - N` otherwise. Row index is the first
/// coordinate. The row/column `-N/2` (Nyquist) is never populated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    length: f64,
    n: usize,
    pad: f64,
}

impl Grid {
    pub const DEFAULT_PAD: f64 = 1.5;

    pub fn new(length: f64, n: usize, pad: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::param(
                "grid.length",
                format!("must be positive, got {length}"),
            ));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::param(
                "grid.n",
                format!("must be even and >= 8, got {n}"),
            ));
        }
        if !(pad.is_finite() && pad >= 1.5) {
            return Err(Error::param(
                "grid.pad",
                format!("must be >= 3/2, got {pad}"),
            ));
        }
        Ok(Grid { length, n, pad })
    }

    /// `L = 2π` so that wavevectors coincide with integer wavenumbers.
    pub fn periodic_2pi(n: usize) -> Result<Self> {
        Grid::new(2.0 * PI, n, Self::DEFAULT_PAD)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pad(&self) -> f64 {
        self.pad
    }

    /// Number of stored coefficients, `N²`.
    pub fn size(&self) -> usize {
        self.n * self.n
    }

    /// Smallest nonzero wavenumber magnitude `2π/L`.
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Largest resolved integer wavenumber, `N/2 - 1`.
    pub fn max_wavenumber(&self) -> i64 {
        self.n as i64 / 2 - 1
    }

    /// Physical grid size used for dealiased products: `ceil(pad·N)` rounded up to even.
    pub fn padded_size(&self) -> usize {
        let m = (self.pad * self.n as f64 - 1e-9).ceil() as usize;
        m + m % 2
    }

    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Storage index of integer wavevector `(n1, n2)`, if resolved.
    #[inline]
    pub fn index_of(&self, n1: i64, n2: i64) -> Option<usize> {
        let h = self.max_wavenumber();
        if n1.abs() > h || n2.abs() > h {
            return None;
        }
        let wrap = |m: i64| m.rem_euclid(self.n as i64) as usize;
        Some(wrap(n1) * self.n + wrap(n2))
    }

    /// Integer wavevector at storage index `idx`.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> (i64, i64) {
        (self.wavenumber(idx / self.n), self.wavenumber(idx % self.n))
    }

    /// Physical wavevector `κ = 2π n / L` at storage index `idx`.
    #[inline]
    pub fn kappa(&self, idx: usize) -> (f64, f64) {
        let (n1, n2) = self.wavevector(idx);
        let s = self.fundamental();
        (s * n1 as f64, s * n2 as f64)
    }

    #[inline]
    pub fn kappa_sq(&self, idx: usize) -> f64 {
        let (k1, k2) = self.kappa(idx);
        k1 * k1 + k2 * k2
    }

    /// Storage index of `-n` for the mode stored at `idx`.
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let (i1, i2) = (idx / self.n, idx % self.n);
        ((self.n - i1) % self.n) * self.n + (self.n - i2) % self.n
    }

    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let h = self.n / 2;
        idx / self.n == h || idx % self.n == h
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}
