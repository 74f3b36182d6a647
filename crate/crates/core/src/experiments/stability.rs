//! Monte Carlo means of the discrete energy and pressure bounds across levels.

use rayon::prelude::*;

use super::errors::LevelInfo;
use super::study::StudyConfig;
use crate::error::Result;
use crate::schemes::{prepare_initial, run_trajectory, NoiseInput, Scheme, StepDiagnostics};

/// Bound quantities of one path at one level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityTerms {
    /// `max_m ‖u^m‖²`
    pub max_energy: f64,
    /// `ν k Σ ‖∇ũ^ℓ‖²`
    pub grad_sum: f64,
    /// `k Σ ‖p^ℓ‖²`
    pub pressure_sum: f64,
}

impl StabilityTerms {
    pub fn from_diagnostics(diag: &[StepDiagnostics], nu: f64, k: f64) -> Self {
        StabilityTerms {
            max_energy: diag.iter().map(|d| d.energy).fold(0.0, f64::max),
            grad_sum: nu * k * diag.iter().map(|d| d.tilde_grad_sq).sum::<f64>(),
            pressure_sum: k * diag.iter().map(|d| d.pressure_sq).sum::<f64>(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityLevel {
    pub level: LevelInfo,
    /// Means over the paths that did not fail.
    pub mean: StabilityTerms,
    pub finite_paths: usize,
    pub failed_paths: usize,
}

/// `(max - min) / min` of a set of positive values.
pub fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) / min
}

/// Runs the penalty scheme at every level of `cfg` on coupled noise (the
/// ladder is sampled at `cfg.reference_steps` and coarsened) and averages the
/// bound quantities. No reference solution is computed.
pub fn run_stability_sweep(cfg: &StudyConfig) -> Result<Vec<StabilityLevel>> {
    cfg.validate()?;
    let model = cfg.noise_model()?;
    let u0 = prepare_initial(cfg.initial.build(cfg.grid));
    let scheme = if cfg.nonlinear {
        Scheme::Penalty
    } else {
        Scheme::StokesPenalty
    };
    let per_path = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|path| -> Result<Vec<Option<StabilityTerms>>> {
            let fine = match &model {
                Some(m) => Some(m.sample_increments(
                    cfg.reference_steps,
                    cfg.horizon / cfg.reference_steps as f64,
                    cfg.base_seed,
                    path,
                )?),
                None => None,
            };
            cfg.levels
                .iter()
                .map(|&steps| {
                    let params = cfg.level_params(steps)?;
                    let coarse = fine
                        .as_ref()
                        .map(|f| f.coarsen(cfg.reference_steps / steps))
                        .transpose()?;
                    let noise = match (&model, &coarse) {
                        (Some(model), Some(increments)) => Some(NoiseInput { model, increments }),
                        _ => None,
                    };
                    match run_trajectory(scheme, &params, &u0, noise, &cfg.opts, &mut []) {
                        Ok(rec) => Ok(Some(StabilityTerms::from_diagnostics(
                            &rec.diagnostics,
                            cfg.nu,
                            params.k(),
                        ))),
                        Err(e) if e.is_numerical() => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    (0..cfg.levels.len())
        .map(|l| {
            let finite: Vec<StabilityTerms> = per_path.iter().filter_map(|p| p[l]).collect();
            let n = finite.len() as f64;
            let mean = |f: fn(&StabilityTerms) -> f64| finite.iter().map(f).sum::<f64>() / n;
            Ok(StabilityLevel {
                level: cfg.level_info(l)?,
                mean: StabilityTerms {
                    max_energy: mean(|t| t.max_energy),
                    grad_sum: mean(|t| t.grad_sum),
                    pressure_sum: mean(|t| t.pressure_sum),
                },
                finite_paths: finite.len(),
                failed_paths: cfg.paths - finite.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terms_from_diagnostics() {
        let d = |e: f64, g: f64, p: f64| StepDiagnostics {
            step: 1,
            t: 0.0,
            energy: e,
            enstrophy: 0.0,
            div_residual: 0.0,
            penalty_residual: 0.0,
            picard_iters: 1,
            tilde_grad_sq: g,
            pressure_sq: p,
        };
        let t = StabilityTerms::from_diagnostics(&[d(1.0, 2.0, 3.0), d(4.0, 5.0, 6.0)], 0.5, 0.1);
        assert_eq!(t.max_energy, 4.0);
        assert!((t.grad_sum - 0.35).abs() < 1e-15);
        assert!((t.pressure_sum - 0.9).abs() < 1e-15);
        assert_eq!(relative_spread(&[2.0, 3.0, 2.5]), 0.5);
    }
}
