//! Solenoidal trace-class Q-Wiener noise and level-coupled increment ladders.
//!
//! The noise is expanded in the `L²`-orthonormal divergence-free basis
//! `√2/L · (n⊥/|n|) cos(κ_n·x)` and `√2/L · (n⊥/|n|) sin(κ_n·x)` over the half-lattice
//! representatives `n` with `|n|∞ ≤ J`, with eigenvalue `q_n = (1 + |κ_n|²)^{-γ}` on both.
//!
//! Increments are stored as fixed-point integers (multiples of [`QUANTUM`]), so
//! summing fine increments into coarse ones is exact in any order.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralScalar, SpectralVector};

/// Resolution of stored increments, `2^-50`.
pub const QUANTUM: f64 = 1.0 / (1u64 << 50) as f64;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream belonging to one Monte Carlo path.
pub fn path_seed(base_seed: u64, path_index: u64) -> u64 {
    mix64(base_seed ^ mix64(path_index))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseMode {
    pub wavevector: (i64, i64),
    /// Eigenvalue `q_n` shared by the cosine and sine channels.
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    grid: Grid,
    cutoff: usize,
    gamma: f64,
    modes: Vec<NoiseMode>,
    trace: f64,
}

impl NoiseModel {
    pub const DEFAULT_GAMMA: f64 = 3.0;

    /// `min(8, N/4)`.
    pub fn default_cutoff(n: usize) -> usize {
        (n / 4).min(8)
    }

    pub fn new(grid: Grid, cutoff: usize, gamma: f64) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::param("noise.cutoff", "must be >= 1"));
        }
        if 2 * cutoff + 1 > grid.n() {
            return Err(Error::param(
                "noise.cutoff",
                format!("2J+1 = {} exceeds N = {}", 2 * cutoff + 1, grid.n()),
            ));
        }
        if !(gamma.is_finite() && gamma > 2.0) {
            return Err(Error::param(
                "noise.gamma",
                format!("must be > 2 for a trace-class covariance, got {gamma}"),
            ));
        }
        let j = cutoff as i64;
        let s = grid.fundamental();
        let mut modes = Vec::new();
        for n1 in 0..=j {
            for n2 in -j..=j {
                if n1 > 0 || n2 > 0 {
                    let k2 = s * s * (n1 * n1 + n2 * n2) as f64;
                    modes.push(NoiseMode {
                        wavevector: (n1, n2),
                        variance: (1.0 + k2).powf(-gamma),
                    });
                }
            }
        }
        let trace = modes.iter().map(|m| 2.0 * m.variance).sum();
        Ok(NoiseModel {
            grid,
            cutoff,
            gamma,
            modes,
            trace,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn modes(&self) -> &[NoiseMode] {
        &self.modes
    }

    /// Number of real Brownian channels (two per representative mode).
    pub fn channels(&self) -> usize {
        2 * self.modes.len()
    }

    /// `trace Q = Σ 2 q_n`.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// Eigenvalue of channel `c`.
    pub fn channel_variance(&self, c: usize) -> f64 {
        self.modes[c / 2].variance
    }

    /// Field `Σ_c values[c] e_c` in the orthonormal basis.
    pub fn assemble(&self, values: &[f64]) -> SpectralVector {
        assert_eq!(values.len(), self.channels());
        let g = self.grid;
        let mut cx = vec![Complex64::default(); g.size()];
        let mut cy = vec![Complex64::default(); g.size()];
        let amp = std::f64::consts::SQRT_2 / (2.0 * g.length());
        for (mode, ab) in self.modes.iter().zip(values.chunks_exact(2)) {
            let (n1, n2) = mode.wavevector;
            let norm = ((n1 * n1 + n2 * n2) as f64).sqrt();
            let (d1, d2) = (-(n2 as f64) / norm, n1 as f64 / norm);
            let c = Complex64::new(ab[0], -ab[1]) * amp;
            let i = g.index_of(n1, n2).expect("cutoff resolved");
            let j = g.conjugate_index(i);
            cx[i] = c * d1;
            cy[i] = c * d2;
            cx[j] = cx[i].conj();
            cy[j] = cy[i].conj();
        }
        SpectralVector::new(
            SpectralScalar::from_raw(g, cx),
            SpectralScalar::from_raw(g, cy),
        )
        .expect("same grid")
    }

    /// Basis field `e_c`.
    pub fn basis_field(&self, c: usize) -> SpectralVector {
        let mut v = vec![0.0; self.channels()];
        v[c] = 1.0;
        self.assemble(&v)
    }

    /// Draws `steps` increments of length `step_len` for one path.
    ///
    /// Channel `c` uses ChaCha stream `c` keyed by [`path_seed`], so the result
    /// depends only on `(base_seed, path_index)` and not on scheduling.
    pub fn sample_increments(
        &self,
        steps: usize,
        step_len: f64,
        base_seed: u64,
        path_index: u64,
    ) -> Result<WienerIncrements> {
        if steps < 1 {
            return Err(Error::param("M_fine", "must be >= 1"));
        }
        if !(step_len.is_finite() && step_len >= 0.0) {
            return Err(Error::param(
                "k_fine",
                format!("must be >= 0, got {step_len}"),
            ));
        }
        let channels = self.channels();
        let mut ticks = vec![0i64; steps * channels];
        let seed = path_seed(base_seed, path_index);
        for c in 0..channels {
            let sd = (step_len * self.channel_variance(c)).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            for s in 0..steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                ticks[s * channels + c] = quantize(sd * z);
            }
        }
        Ok(WienerIncrements {
            meta: LadderMeta {
                base_seed,
                path_index,
                fine_steps: steps,
                fine_step_len: step_len,
                cutoff: self.cutoff,
                gamma: self.gamma,
            },
            factor: 1,
            steps,
            step_len,
            channels,
            ticks,
        })
    }

    /// Noise increment over step `step` (1-based) of `incs` as a field.
    pub fn increment_field(&self, incs: &WienerIncrements, step: usize) -> Result<SpectralVector> {
        if incs.channels != self.channels() {
            return Err(Error::CouplingMismatch(format!(
                "ladder has {} channels, model has {}",
                incs.channels,
                self.channels()
            )));
        }
        Ok(self.assemble(&incs.values(step)?))
    }
}

#[inline]
fn quantize(x: f64) -> i64 {
    let t = (x / QUANTUM).round();
    assert!(t.abs() < 9.0e18, "increment {x} outside fixed-point range");
    t as i64
}

/// Provenance of an increment ladder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderMeta {
    pub base_seed: u64,
    pub path_index: u64,
    pub fine_steps: usize,
    pub fine_step_len: f64,
    pub cutoff: usize,
    pub gamma: f64,
}

/// Brownian increments for every channel on a uniform time grid, possibly a
/// coarsening of the level they were sampled at.
#[derive(Clone, Debug, PartialEq)]
pub struct WienerIncrements {
    meta: LadderMeta,
    factor: usize,
    steps: usize,
    step_len: f64,
    channels: usize,
    ticks: Vec<i64>,
}

impl WienerIncrements {
    pub fn meta(&self) -> &LadderMeta {
        &self.meta
    }

    /// Number of fine steps per step of this ladder.
    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_len(&self) -> f64 {
        self.step_len
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn ticks(&self) -> &[i64] {
        &self.ticks
    }

    pub(crate) fn from_parts(
        meta: LadderMeta,
        factor: usize,
        channels: usize,
        ticks: Vec<i64>,
    ) -> Result<Self> {
        if factor == 0 || channels == 0 || !ticks.len().is_multiple_of(channels) {
            return Err(Error::Format("inconsistent ladder dimensions".into()));
        }
        let steps = ticks.len() / channels;
        if steps * factor != meta.fine_steps {
            return Err(Error::Format(
                "ladder length disagrees with metadata".into(),
            ));
        }
        Ok(WienerIncrements {
            meta,
            factor,
            steps,
            step_len: meta.fine_step_len * factor as f64,
            channels,
            ticks,
        })
    }

    /// Increment values of step `step` (1-based), one per channel.
    pub fn values(&self, step: usize) -> Result<Vec<f64>> {
        if step == 0 || step > self.steps {
            return Err(Error::OutOfRange {
                index: step,
                max: self.steps,
            });
        }
        let row = &self.ticks[(step - 1) * self.channels..step * self.channels];
        Ok(row.iter().map(|&t| t as f64 * QUANTUM).collect())
    }

    pub fn value(&self, step: usize, channel: usize) -> Result<f64> {
        Ok(self.values(step)?[channel])
    }

    /// Sums each run of `m` consecutive increments.
    pub fn coarsen(&self, m: usize) -> Result<Self> {
        if m == 0 || !self.steps.is_multiple_of(m) {
            return Err(Error::param(
                "coarsening factor",
                format!("{m} does not divide {} steps", self.steps),
            ));
        }
        let c = self.channels;
        let steps = self.steps / m;
        let mut ticks = vec![0i64; steps * c];
        for s in 0..steps {
            let out = &mut ticks[s * c..(s + 1) * c];
            for f in s * m..(s + 1) * m {
                for (o, t) in out.iter_mut().zip(&self.ticks[f * c..(f + 1) * c]) {
                    *o += t;
                }
            }
        }
        Ok(WienerIncrements {
            meta: self.meta,
            factor: self.factor * m,
            steps,
            step_len: self.meta.fine_step_len * (self.factor * m) as f64,
            channels: c,
            ticks,
        })
    }

    /// `W(T) - W(0)` per channel, in fixed-point ticks.
    pub fn total_ticks(&self) -> Vec<i64> {
        let c = self.channels;
        let mut out = vec![0i64; c];
        for row in self.ticks.chunks_exact(c) {
            for (o, t) in out.iter_mut().zip(row) {
                *o += t;
            }
        }
        out
    }

    /// True when both ladders come from the same sampled path.
    pub fn same_path(&self, other: &Self) -> bool {
        self.meta == other.meta && self.channels == other.channels
    }
}
