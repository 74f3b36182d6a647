//! Square 2D complex FFTs and the spectral <-> padded physical grid maps.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::Grid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized forward (`e^{-i}`) and inverse (`e^{+i}`) transforms on an `m × m` grid.
pub struct Fft2 {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(m: usize) -> Self {
        let (fwd, inv) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(m), p.plan_fft_inverse(m))
        });
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Fft2 {
            m,
            fwd,
            inv,
            scratch: vec![Complex64::default(); scratch_len],
            tmp: vec![Complex64::default(); m * m],
        }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        let f = Arc::clone(&self.fwd);
        self.apply(f.as_ref(), data);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        let f = Arc::clone(&self.inv);
        self.apply(f.as_ref(), data);
    }

    fn apply(&mut self, fft: &dyn Fft<f64>, data: &mut [Complex64]) {
        let m = self.m;
        debug_assert_eq!(data.len(), m * m);
        fft.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.tmp, m);
        fft.process_with_scratch(&mut self.tmp, &mut self.scratch);
        transpose(&self.tmp, data, m);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in 0..m {
            dst[j * m + i] = src[i * m + j];
        }
    }
}

/// Writes the resolved coefficients of `coeffs` into an `m × m` spectral array
/// (zero padding). `m >= N` must hold.
pub fn spread(grid: &Grid, coeffs: &[Complex64], m: usize, out: &mut [Complex64]) {
    let n = grid.n();
    debug_assert!(m >= n);
    out.iter_mut().for_each(|c| *c = Complex64::default());
    let h = n / 2;
    for i1 in 0..n {
        if i1 == h {
            continue;
        }
        let r = remap(grid.wavenumber(i1), m);
        for i2 in 0..n {
            if i2 == h {
                continue;
            }
            out[r * m + remap(grid.wavenumber(i2), m)] = coeffs[i1 * n + i2];
        }
    }
}

/// Reads the resolved modes back from an unnormalized forward transform of
/// size `m × m`, dividing by `m²`. Nyquist and mean entries are left zero.
pub fn truncate(grid: &Grid, data: &[Complex64], m: usize, out: &mut [Complex64]) {
    let n = grid.n();
    let h = n / 2;
    let norm = 1.0 / (m * m) as f64;
    for i1 in 0..n {
        for i2 in 0..n {
            let idx = i1 * n + i2;
            if i1 == h || i2 == h || idx == 0 {
                out[idx] = Complex64::default();
                continue;
            }
            let r = remap(grid.wavenumber(i1), m);
            let c = remap(grid.wavenumber(i2), m);
            out[idx] = data[r * m + c] * norm;
        }
    }
}

#[inline]
fn remap(k: i64, m: usize) -> usize {
    k.rem_euclid(m as i64) as usize
}

/// Replaces `c` by its Hermitian part `(c(n) + conj c(-n)) / 2`.
pub fn hermitian_part(grid: &Grid, coeffs: &mut [Complex64]) {
    for idx in 0..coeffs.len() {
        let j = grid.conjugate_index(idx);
        if j < idx {
            continue;
        }
        if j == idx {
            coeffs[idx].im = 0.0;
            continue;
        }
        let a = coeffs[idx];
        let b = coeffs[j].conj();
        let s = (a + b) * 0.5;
        coeffs[idx] = s;
        coeffs[j] = s.conj();
    }
}

/// Like [`truncate`], for the forward transform `H` of a packed pair `f + i g`
/// of real fields: `F(n) = (H(n) + conj H(-n)) / 2` and `G(n) = (H(n) - conj H(-n)) / 2i`.
pub fn truncate_pair(
    grid: &Grid,
    data: &[Complex64],
    m: usize,
    out_f: &mut [Complex64],
    out_g: &mut [Complex64],
) {
    let n = grid.n();
    let h = n / 2;
    let norm = 0.5 / (m * m) as f64;
    for i1 in 0..n {
        for i2 in 0..n {
            let idx = i1 * n + i2;
            if i1 == h || i2 == h || idx == 0 {
                out_f[idx] = Complex64::default();
                out_g[idx] = Complex64::default();
                continue;
            }
            let k1 = grid.wavenumber(i1);
            let k2 = grid.wavenumber(i2);
            let a = data[remap(k1, m) * m + remap(k2, m)];
            let b = data[remap(-k1, m) * m + remap(-k2, m)].conj();
            out_f[idx] = (a + b) * norm;
            let d = (a - b) * norm;
            out_g[idx] = Complex64::new(d.im, -d.re);
        }
    }
}

/// Zero-pads the packed spectral array `F + i G` so that one inverse
/// transform yields `f + i g` in physical space.
pub fn spread_pair(grid: &Grid, f: &[Complex64], g: &[Complex64], m: usize, out: &mut [Complex64]) {
    let n = grid.n();
    out.iter_mut().for_each(|c| *c = Complex64::default());
    let h = n / 2;
    for i1 in 0..n {
        if i1 == h {
            continue;
        }
        let r = remap(grid.wavenumber(i1), m);
        for i2 in 0..n {
            if i2 == h {
                continue;
            }
            let idx = i1 * n + i2;
            let gi = g[idx];
            out[r * m + remap(grid.wavenumber(i2), m)] = f[idx] + Complex64::new(-gi.im, gi.re);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_roundtrip() {
        let m = 12;
        let mut fft = Fft2::new(m);
        let orig: Vec<Complex64> = (0..m * m)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut data = orig.clone();
        fft.forward(&mut data);
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a / (m * m) as f64 - b).norm() < 1e-14);
        }
    }

    #[test]
    fn single_mode_lands_on_expected_bin() {
        let m = 8;
        let mut fft = Fft2::new(m);
        // e^{i(2 x1 - x2)} sampled at x_j = 2π j / m
        let mut data: Vec<Complex64> = (0..m * m)
            .map(|idx| {
                let (j1, j2) = ((idx / m) as f64, (idx % m) as f64);
                let th = 2.0 * std::f64::consts::PI * (2.0 * j1 - j2) / m as f64;
                Complex64::new(th.cos(), th.sin())
            })
            .collect();
        fft.forward(&mut data);
        let hit = 2 * m + (m - 1);
        for (idx, c) in data.iter().enumerate() {
            let want = if idx == hit { (m * m) as f64 } else { 0.0 };
            assert!((c.re - want).abs() < 1e-10 && c.im.abs() < 1e-10);
        }
    }
}
