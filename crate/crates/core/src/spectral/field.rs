use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use super::grid::Grid;
use super::transform::{self, Fft2};
use crate::error::{Error, Result};

/// Relative size of the mean coefficient above which a field counts as non-mean-free.
pub const MEAN_TOLERANCE: f64 = 1e-12;

/// Which norm to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Norm {
    L2,
    /// Physical-space `L⁴` norm by quadrature on a padded grid.
    L4,
    /// Homogeneous Sobolev norm `(Σ |κ|^{2s} |f̂|² L²)^{1/2}`, any real `s`.
    Sobolev(f64),
}

/// Operations shared by scalar and vector spectral fields.
pub trait Field: Clone {
    fn grid(&self) -> &Grid;
    fn laplacian(&self) -> Self;
    /// Inverse Laplacian on mean-free fields.
    fn inv_laplacian(&self) -> Result<Self>;
    fn norm(&self, which: Norm) -> Result<f64>;
    /// `L²` inner product.
    fn inner(&self, other: &Self) -> f64;

    fn l2(&self) -> f64 {
        let sq = self.inner(self);
        if sq.is_nan() {
            f64::NAN
        } else {
            sq.max(0.0).sqrt()
        }
    }

    /// `‖∇f‖`, the homogeneous `H¹` norm.
    fn h1(&self) -> f64 {
        self.norm(Norm::Sobolev(1.0)).unwrap_or(f64::NAN)
    }
}

/// Real, periodic scalar field `f(x) = Σ_n f̂(n) e^{iκ_n·x}`.
///
/// With this normalization `‖f‖²_{L²} = L² Σ |f̂(n)|²`. Constructors keep the
/// supplied mean coefficient; every differential operator pins it to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralScalar {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralScalar {
    pub fn zeros(grid: Grid) -> Self {
        SpectralScalar {
            grid,
            coeffs: vec![Complex64::default(); grid.size()],
        }
    }

    /// Builds a field from coefficients in storage order. Nyquist entries are
    /// dropped and the coefficients are replaced by their Hermitian part.
    pub fn from_coeffs(grid: Grid, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.size() {
            return Err(Error::param(
                "coeffs",
                format!(
                    "expected {} coefficients, got {}",
                    grid.size(),
                    coeffs.len()
                ),
            ));
        }
        for (idx, c) in coeffs.iter_mut().enumerate() {
            if grid.is_nyquist(idx) {
                *c = Complex64::default();
            }
        }
        transform::hermitian_part(&grid, &mut coeffs);
        Ok(SpectralScalar { grid, coeffs })
    }

    /// Samples on the `N × N` grid `x_j = j L / N`.
    pub fn from_physical(grid: Grid, values: &[f64]) -> Result<Self> {
        let n = grid.n();
        if values.len() != n * n {
            return Err(Error::param(
                "values",
                format!("expected {} samples, got {}", n * n, values.len()),
            ));
        }
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Fft2::new(n).forward(&mut data);
        let scale = 1.0 / (n * n) as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        SpectralScalar::from_coeffs(grid, data)
    }

    /// Samples `f(x1, x2)` on the `N × N` grid and transforms.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let h = grid.length() / n as f64;
        let values: Vec<f64> = (0..n * n)
            .map(|idx| f((idx / n) as f64 * h, (idx % n) as f64 * h))
            .collect();
        SpectralScalar::from_physical(grid, &values).expect("sized by construction")
    }

    /// Physical values on an `m × m` grid (`m >= N`), row-major in `x1`.
    pub fn to_physical_on(&self, m: usize) -> Vec<f64> {
        assert!(
            m >= self.grid.n(),
            "physical grid coarser than spectral grid"
        );
        let mut data = vec![Complex64::default(); m * m];
        transform::spread(&self.grid, &self.coeffs, m, &mut data);
        Fft2::new(m).inverse(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }

    pub fn to_physical(&self) -> Vec<f64> {
        self.to_physical_on(self.grid.n())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn from_raw(grid: Grid, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.size());
        SpectralScalar { grid, coeffs }
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of wavevector `(n1, n2)`; zero for unresolved modes.
    pub fn coeff(&self, n1: i64, n2: i64) -> Complex64 {
        self.grid
            .index_of(n1, n2)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// Sets the coefficient of `n` and the conjugate of `-n`.
    pub fn set_mode(&mut self, n1: i64, n2: i64, c: Complex64) -> Result<()> {
        let idx = self
            .grid
            .index_of(n1, n2)
            .ok_or_else(|| Error::param("mode", format!("({n1}, {n2}) is not resolved")))?;
        let j = self.grid.conjugate_index(idx);
        if j == idx {
            self.coeffs[idx] = Complex64::new(c.re, 0.0);
        } else {
            self.coeffs[idx] = c;
            self.coeffs[j] = c.conj();
        }
        Ok(())
    }

    pub fn mean_coeff(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn without_mean(&self) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = Complex64::default();
        out
    }

    fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub(crate) fn check_mean_free(&self) -> Result<()> {
        let mean = self.coeffs[0].norm();
        let total = self.coeff_norm();
        if mean > MEAN_TOLERANCE * total {
            return Err(Error::NonzeroMean {
                mean,
                relative: mean / total,
            });
        }
        Ok(())
    }

    /// Applies a per-mode multiplier; the mean and Nyquist entries come out zero.
    pub(crate) fn map_modes(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                if idx == 0 || self.grid.is_nyquist(idx) {
                    Complex64::default()
                } else {
                    f(idx, c)
                }
            })
            .collect();
        SpectralScalar::from_raw(self.grid, coeffs)
    }

    pub fn gradient(&self) -> SpectralVector {
        let g = self.grid;
        let d1 = self.map_modes(|i, c| c * Complex64::new(0.0, g.kappa(i).0));
        let d2 = self.map_modes(|i, c| c * Complex64::new(0.0, g.kappa(i).1));
        SpectralVector::from_parts(d1, d2)
    }

    /// Derivative along coordinate `axis` (0 or 1).
    pub fn partial(&self, axis: usize) -> Self {
        let g = self.grid;
        self.map_modes(|i, c| {
            let k = g.kappa(i);
            c * Complex64::new(0.0, if axis == 0 { k.0 } else { k.1 })
        })
    }

    /// `Σ_n |κ_n|^{2s} |f̂(n)|² L²`; the mean contributes only at `s = 0`.
    pub fn sobolev_sq(&self, s: f64) -> f64 {
        let g = &self.grid;
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                if s == 0.0 {
                    c.norm_sqr()
                } else if idx == 0 {
                    0.0
                } else {
                    g.kappa_sq(idx).powf(s) * c.norm_sqr()
                }
            })
            .sum();
        sum * g.length() * g.length()
    }

    pub fn scale(&self, a: f64) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c * a).collect();
        SpectralScalar::from_raw(self.grid, coeffs)
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += o * a;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }
}

fn l4_grid(g: &Grid) -> usize {
    g.padded_size().max(2 * g.n())
}

impl Field for SpectralScalar {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn laplacian(&self) -> Self {
        let g = self.grid;
        self.map_modes(|i, c| c * -g.kappa_sq(i))
    }

    fn inv_laplacian(&self) -> Result<Self> {
        self.check_mean_free()?;
        let g = self.grid;
        Ok(self.map_modes(|i, c| c / -g.kappa_sq(i)))
    }

    fn norm(&self, which: Norm) -> Result<f64> {
        match which {
            Norm::L2 => Ok(self.sobolev_sq(0.0).sqrt()),
            Norm::Sobolev(s) => {
                if s < 0.0 {
                    self.check_mean_free()?;
                }
                Ok(self.sobolev_sq(s).sqrt())
            }
            Norm::L4 => {
                let m = l4_grid(&self.grid);
                let h = self.grid.length() / m as f64;
                let sum: f64 = self.to_physical_on(m).iter().map(|v| v.powi(4)).sum();
                Ok((sum * h * h).powf(0.25))
            }
        }
    }

    fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let l = self.grid.length();
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum();
        s * l * l
    }
}

/// Real, periodic two-component vector field on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVector {
    comps: [SpectralScalar; 2],
}

impl SpectralVector {
    pub fn zeros(grid: Grid) -> Self {
        SpectralVector {
            comps: [SpectralScalar::zeros(grid), SpectralScalar::zeros(grid)],
        }
    }

    pub fn new(x: SpectralScalar, y: SpectralScalar) -> Result<Self> {
        x.grid.check_same(&y.grid)?;
        Ok(SpectralVector { comps: [x, y] })
    }

    pub(crate) fn from_parts(x: SpectralScalar, y: SpectralScalar) -> Self {
        debug_assert_eq!(x.grid, y.grid);
        SpectralVector { comps: [x, y] }
    }

    pub fn from_physical(grid: Grid, x: &[f64], y: &[f64]) -> Result<Self> {
        Ok(Self::from_parts(
            SpectralScalar::from_physical(grid, x)?,
            SpectralScalar::from_physical(grid, y)?,
        ))
    }

    pub fn from_fn(grid: Grid, fx: impl Fn(f64, f64) -> f64, fy: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_parts(
            SpectralScalar::from_fn(grid, fx),
            SpectralScalar::from_fn(grid, fy),
        )
    }

    pub fn x(&self) -> &SpectralScalar {
        &self.comps[0]
    }

    pub fn y(&self) -> &SpectralScalar {
        &self.comps[1]
    }

    pub fn components(&self) -> &[SpectralScalar; 2] {
        &self.comps
    }

    pub fn into_components(self) -> [SpectralScalar; 2] {
        self.comps
    }

    pub fn divergence(&self) -> SpectralScalar {
        let g = self.comps[0].grid;
        let (ux, uy) = (self.comps[0].coeffs(), self.comps[1].coeffs());
        let coeffs = (0..g.size())
            .map(|i| {
                if i == 0 || g.is_nyquist(i) {
                    return Complex64::default();
                }
                let (k1, k2) = g.kappa(i);
                Complex64::new(0.0, 1.0) * (ux[i] * k1 + uy[i] * k2)
            })
            .collect();
        SpectralScalar::from_raw(g, coeffs)
    }

    /// Helmholtz–Leray projection `(I - κκᵀ/|κ|²) û` per mode.
    pub fn leray_project(&self) -> Self {
        self.split_modes(|c1, c2, k1, k2, k2sum| {
            let dot = (c1 * k1 + c2 * k2) / k2sum;
            (c1 - dot * k1, c2 - dot * k2)
        })
    }

    /// Gradient part `κκᵀ/|κ|² û`, the complement of [`Self::leray_project`].
    pub fn gradient_part(&self) -> Self {
        self.split_modes(|c1, c2, k1, k2, k2sum| {
            let dot = (c1 * k1 + c2 * k2) / k2sum;
            (dot * k1, dot * k2)
        })
    }

    /// Per-mode 2×2 map given `(û1, û2, κ1, κ2, |κ|²)`; mean and Nyquist come out zero.
    pub(crate) fn split_modes(
        &self,
        f: impl Fn(Complex64, Complex64, f64, f64, f64) -> (Complex64, Complex64),
    ) -> Self {
        let g = self.comps[0].grid;
        let (ux, uy) = (self.comps[0].coeffs(), self.comps[1].coeffs());
        let mut ox = vec![Complex64::default(); g.size()];
        let mut oy = vec![Complex64::default(); g.size()];
        for i in 1..g.size() {
            if g.is_nyquist(i) {
                continue;
            }
            let (k1, k2) = g.kappa(i);
            let (a, b) = f(ux[i], uy[i], k1, k2, k1 * k1 + k2 * k2);
            ox[i] = a;
            oy[i] = b;
        }
        Self::from_parts(
            SpectralScalar::from_raw(g, ox),
            SpectralScalar::from_raw(g, oy),
        )
    }

    /// Physical components on the `N × N` grid.
    pub fn to_physical(&self) -> [Vec<f64>; 2] {
        [self.comps[0].to_physical(), self.comps[1].to_physical()]
    }

    pub fn sobolev_sq(&self, s: f64) -> f64 {
        self.comps[0].sobolev_sq(s) + self.comps[1].sobolev_sq(s)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::from_parts(self.comps[0].scale(a), self.comps[1].scale(a))
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.comps[0].axpy(a, &other.comps[0]);
        self.comps[1].axpy(a, &other.comps[1]);
    }

    pub fn without_mean(&self) -> Self {
        Self::from_parts(self.comps[0].without_mean(), self.comps[1].without_mean())
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(SpectralScalar::is_zero)
    }
}

impl Field for SpectralVector {
    fn grid(&self) -> &Grid {
        &self.comps[0].grid
    }

    fn laplacian(&self) -> Self {
        Self::from_parts(self.comps[0].laplacian(), self.comps[1].laplacian())
    }

    fn inv_laplacian(&self) -> Result<Self> {
        Ok(Self::from_parts(
            self.comps[0].inv_laplacian()?,
            self.comps[1].inv_laplacian()?,
        ))
    }

    fn norm(&self, which: Norm) -> Result<f64> {
        match which {
            Norm::L2 => Ok(self.sobolev_sq(0.0).sqrt()),
            Norm::Sobolev(s) => {
                if s < 0.0 {
                    self.comps[0].check_mean_free()?;
                    self.comps[1].check_mean_free()?;
                }
                Ok(self.sobolev_sq(s).sqrt())
            }
            Norm::L4 => {
                let g = self.grid();
                let m = l4_grid(g);
                let h = g.length() / m as f64;
                let a = self.comps[0].to_physical_on(m);
                let b = self.comps[1].to_physical_on(m);
                let sum: f64 = a.iter().zip(&b).map(|(x, y)| (x * x + y * y).powi(2)).sum();
                Ok((sum * h * h).powf(0.25))
            }
        }
    }

    fn inner(&self, other: &Self) -> f64 {
        self.comps[0].inner(&other.comps[0]) + self.comps[1].inner(&other.comps[1])
    }
}

macro_rules! impl_arith {
    ($t:ident) => {
        impl Add<&$t> for &$t {
            type Output = $t;
            fn add(self, rhs: &$t) -> $t {
                let mut out = self.clone();
                out.axpy(1.0, rhs);
                out
            }
        }
        impl Sub<&$t> for &$t {
            type Output = $t;
            fn sub(self, rhs: &$t) -> $t {
                let mut out = self.clone();
                out.axpy(-1.0, rhs);
                out
            }
        }
        impl Add for $t {
            type Output = $t;
            fn add(mut self, rhs: $t) -> $t {
                self.axpy(1.0, &rhs);
                self
            }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(mut self, rhs: $t) -> $t {
                self.axpy(-1.0, &rhs);
                self
            }
        }
        impl AddAssign<&$t> for $t {
            fn add_assign(&mut self, rhs: &$t) {
                self.axpy(1.0, rhs);
            }
        }
        impl SubAssign<&$t> for $t {
            fn sub_assign(&mut self, rhs: &$t) {
                self.axpy(-1.0, rhs);
            }
        }
        impl Neg for &$t {
            type Output = $t;
            fn neg(self) -> $t {
                self.scale(-1.0)
            }
        }
        impl Mul<&$t> for f64 {
            type Output = $t;
            fn mul(self, rhs: &$t) -> $t {
                rhs.scale(self)
            }
        }
    };
}

impl_arith!(SpectralScalar);
impl_arith!(SpectralVector);
