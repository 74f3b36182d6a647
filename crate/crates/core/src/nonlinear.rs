//! Dealiased convective operators `B(u,v) = [u·∇]v`, `B̃(u,v) = B(u,v) + (div u) v / 2`
//! and the trilinear form `b̃(u,v,w) = ⟨B̃(u,v), w⟩`.
//!
//! Products are formed on a zero-padded physical grid of at least `3N/2`
//! points per direction, so every retained coefficient of a quadratic product
//! is alias-free. The result is truncated back to the `N`-mode space.

use num_complex::Complex64;

use crate::error::Result;
use crate::spectral::transform::{self, Fft2};
use crate::spectral::{Field, Grid, SpectralScalar, SpectralVector};

/// Per-thread scratch for padded products.
pub struct PaddedWorkspace {
    grid: Grid,
    m: usize,
    fft: Fft2,
    bufs: [Vec<Complex64>; 5],
}

impl PaddedWorkspace {
    pub fn new(grid: Grid) -> Self {
        let m = grid.padded_size();
        PaddedWorkspace {
            grid,
            m,
            fft: Fft2::new(m),
            bufs: std::array::from_fn(|_| vec![Complex64::default(); m * m]),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn padded_size(&self) -> usize {
        self.m
    }

    fn load_physical_pair(&mut self, slot: usize, f: &SpectralScalar, g: &SpectralScalar) {
        transform::spread_pair(
            &self.grid,
            f.coeffs(),
            g.coeffs(),
            self.m,
            &mut self.bufs[slot],
        );
        self.fft.inverse(&mut self.bufs[slot]);
    }

    fn convect(
        &mut self,
        u: &SpectralVector,
        v: &SpectralVector,
        div_correction: bool,
    ) -> Result<SpectralVector> {
        self.grid.check_same(u.grid())?;
        self.grid.check_same(v.grid())?;
        let [u1, u2] = u.components();
        let [v1, v2] = v.components();
        self.load_physical_pair(0, u1, u2);
        self.load_physical_pair(1, v1, v2);
        self.load_physical_pair(2, &v1.partial(0), &v1.partial(1));
        self.load_physical_pair(3, &v2.partial(0), &v2.partial(1));
        let zero = SpectralScalar::zeros(self.grid);
        if div_correction {
            self.load_physical_pair(4, &u.divergence(), &zero);
        }
        let [uu, vv, dv1, dv2, du] = &mut self.bufs;
        for i in 0..uu.len() {
            let (a1, a2) = (uu[i].re, uu[i].im);
            let (b1, b2) = (vv[i].re, vv[i].im);
            let mut c1 = a1 * dv1[i].re + a2 * dv1[i].im;
            let mut c2 = a1 * dv2[i].re + a2 * dv2[i].im;
            if div_correction {
                let d = 0.5 * du[i].re;
                c1 += d * b1;
                c2 += d * b2;
            }
            uu[i] = Complex64::new(c1, c2);
        }
        self.fft.forward(&mut self.bufs[0]);
        let mut ox = vec![Complex64::default(); self.grid.size()];
        let mut oy = vec![Complex64::default(); self.grid.size()];
        transform::truncate_pair(&self.grid, &self.bufs[0], self.m, &mut ox, &mut oy);
        SpectralVector::new(
            SpectralScalar::from_coeffs(self.grid, ox)?,
            SpectralScalar::from_coeffs(self.grid, oy)?,
        )
    }
}

/// `B(u, v) = [u·∇]v`, Galerkin-truncated.
pub fn b_apply(
    ws: &mut PaddedWorkspace,
    u: &SpectralVector,
    v: &SpectralVector,
) -> Result<SpectralVector> {
    ws.convect(u, v, false)
}

/// `B̃(u, v) = [u·∇]v + (div u) v / 2`, Galerkin-truncated.
pub fn b_tilde_apply(
    ws: &mut PaddedWorkspace,
    u: &SpectralVector,
    v: &SpectralVector,
) -> Result<SpectralVector> {
    ws.convect(u, v, true)
}

/// `b̃(u, v, w) = ⟨B̃(u, v), w⟩`.
pub fn trilinear(
    ws: &mut PaddedWorkspace,
    u: &SpectralVector,
    v: &SpectralVector,
    w: &SpectralVector,
) -> Result<f64> {
    ws.grid.check_same(w.grid())?;
    Ok(b_tilde_apply(ws, u, v)?.inner(w))
}
