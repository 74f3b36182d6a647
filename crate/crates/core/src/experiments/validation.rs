//! Deterministic and statistical self-checks.

use super::stats::{fit_rate, RateFit};
use crate::error::Result;
use crate::init::taylor_green;
use crate::noise::NoiseModel;
use crate::schemes::{run_trajectory, Observer, Scheme, SchemeParams, SolverOpts, StepView};
use crate::spectral::{Field, Grid};

/// Maximum velocity error of one Taylor–Green run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaylorGreenLevel {
    pub steps: usize,
    pub k: f64,
    pub max_error: f64,
}

struct TaylorGreenError {
    grid: Grid,
    amplitude: f64,
    rate: f64,
    max_error: f64,
}

impl Observer for TaylorGreenError {
    fn observe(&mut self, view: &StepView<'_>) {
        let exact = taylor_green(self.grid, self.amplitude * (-self.rate * view.t).exp());
        self.max_error = self.max_error.max((&view.state.u - &exact).l2());
    }
}

/// Runs `scheme` without noise from the Taylor–Green vortex at each step count
/// and records `max_ℓ ‖u^ℓ - u(t_ℓ)‖` against the exact decaying vortex.
#[allow(clippy::too_many_arguments)]
pub fn taylor_green_convergence(
    scheme: Scheme,
    grid: Grid,
    nu: f64,
    horizon: f64,
    amplitude: f64,
    levels: &[usize],
    eta: f64,
    alpha: f64,
    opts: &SolverOpts,
) -> Result<(Vec<TaylorGreenLevel>, Option<RateFit>)> {
    let k0 = grid.fundamental();
    let mut out = Vec::with_capacity(levels.len());
    for &steps in levels {
        let k = horizon / steps as f64;
        let params = SchemeParams::coupled(nu, k, steps, eta, alpha)?;
        let mut obs = TaylorGreenError {
            grid,
            amplitude,
            rate: 2.0 * nu * k0 * k0,
            max_error: 0.0,
        };
        run_trajectory(
            scheme,
            &params,
            &taylor_green(grid, amplitude),
            None,
            opts,
            &mut [&mut obs],
        )?;
        out.push(TaylorGreenLevel {
            steps,
            k,
            max_error: obs.max_error,
        });
    }
    let fit = if out.len() >= 3 {
        let ks: Vec<f64> = out.iter().map(|l| l.k).collect();
        let es: Vec<f64> = out.iter().map(|l| l.max_error).collect();
        Some(fit_rate(&ks, &es)?)
    } else {
        None
    };
    Ok((out, fit))
}

/// Statistics of sampled increments against the model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseCheck {
    pub samples: usize,
    /// Empirical `E‖ΔW‖² / (k trace Q)`.
    pub energy_ratio: f64,
    /// Largest relative divergence of an assembled increment.
    pub max_divergence: f64,
    /// Coarsening by 2 then 2 agrees with coarsening by 4, and the terminal
    /// value survives every coarsening, bit for bit.
    pub telescoping_exact: bool,
}

pub fn noise_statistics(
    model: &NoiseModel,
    samples: usize,
    k: f64,
    base_seed: u64,
) -> Result<NoiseCheck> {
    let w = model.sample_increments(samples, k, base_seed, 0)?;
    let mut energy = 0.0;
    let mut max_div = 0.0f64;
    for s in 1..=samples {
        let f = model.increment_field(&w, s)?;
        let e = f.sobolev_sq(0.0);
        energy += e;
        if e > 0.0 {
            max_div = max_div.max(f.divergence().l2() / f.h1());
        }
    }
    let ratio = energy / samples as f64 / (k * model.trace());
    let mut exact = true;
    if samples.is_multiple_of(4) {
        let twice = w.coarsen(2)?.coarsen(2)?;
        let once = w.coarsen(4)?;
        exact &= twice == once;
        exact &= once.total_ticks() == w.total_ticks();
    }
    exact &= w.coarsen(samples)?.ticks() == w.total_ticks().as_slice();
    Ok(NoiseCheck {
        samples,
        energy_ratio: ratio,
        max_divergence: max_div,
        telescoping_exact: exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_scheme_on_taylor_green_is_first_order() {
        let g = Grid::periodic_2pi(16).unwrap();
        let (levels, fit) = taylor_green_convergence(
            Scheme::Direct,
            g,
            1.0,
            0.5,
            1.0,
            &[16, 32, 64],
            0.4,
            2.0,
            &SolverOpts::default(),
        )
        .unwrap();
        // implicit Euler on y' = -2y: error curve decreases with k
        assert!(levels.windows(2).all(|w| w[1].max_error < w[0].max_error));
        let s = fit.unwrap().slope;
        assert!((s - 1.0).abs() < 0.1, "slope {s}");
    }

    #[test]
    fn noise_statistics_on_small_model() {
        let g = Grid::periodic_2pi(16).unwrap();
        let model = NoiseModel::new(g, 4, 3.0).unwrap();
        let c = noise_statistics(&model, 1000, 0.01, 5).unwrap();
        assert!((0.9..=1.1).contains(&c.energy_ratio), "{}", c.energy_ratio);
        assert!(c.max_divergence <= 1e-12);
        assert!(c.telescoping_exact);
    }
}
