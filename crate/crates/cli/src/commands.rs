//! Subcommand implementations. Each writes `manifest.txt` and its CSV files
//! into the configured output directory.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use penproj::experiments::{
    estimate_exceedance, fit_rate, median, noise_statistics, relative_spread, run_mc_study,
    run_stability_sweep, sample_set_membership, taylor_green_convergence, ErrorReport, RateFit,
};
use penproj::noise::{NoiseModel, WienerIncrements};
use penproj::schemes::{
    resume_trajectory, run_decomposition, run_trajectory, NoiseInput, Observer, PenaltyState,
    Scheme, StepView,
};
use penproj::snapshot::{save_field, text_dump, Checkpoint, FieldSnapshot};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{error_rows, write_csv, write_manifest, CheckRow, RateRow, SampleSetRow};

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Simulate {
        /// Continue from a checkpoint written by an earlier run.
        resume: Option<PathBuf>,
        /// Also write the state after this step to `checkpoint_<step>.bin`.
        checkpoint_at: Option<usize>,
    },
    Convergence,
    Stability,
    TaylorGreen,
    Decompose,
    NoiseCheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Convergence => "convergence",
            Command::Stability => "stability",
            Command::TaylorGreen => "taylor-green",
            Command::Decompose => "decompose",
            Command::NoiseCheck => "noise-check",
        }
    }
}

/// What a subcommand found. `passed = false` maps to exit status 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub summary: Vec<String>,
}

impl Outcome {
    fn ok(summary: Vec<String>) -> Self {
        Outcome {
            passed: true,
            summary,
        }
    }
}

/// Runs `command` and maps the result to an exit status: 0 on success, 1 on
/// validation failure, 2 on numerical failure.
pub fn exit_status(result: &CliResult<Outcome>) -> i32 {
    match result {
        Ok(o) if o.passed => 0,
        Ok(_) => 1,
        Err(e) => e.exit_code(),
    }
}

pub fn dispatch(command: &Command, cfg: &RunConfig) -> CliResult<Outcome> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write_manifest(cfg, command.name(), &dir)?;
    let hash = cfg.manifest_hash();
    match command {
        Command::Simulate {
            resume,
            checkpoint_at,
        } => simulate(cfg, &dir, &hash, resume.as_deref(), *checkpoint_at),
        Command::Convergence => convergence(cfg, &dir, &hash),
        Command::Stability => stability(cfg, &dir, &hash),
        Command::TaylorGreen => taylor_green(cfg, &dir, &hash),
        Command::Decompose => decompose(cfg, &dir, &hash),
        Command::NoiseCheck => noise_check(cfg, &dir, &hash),
    }
}

struct SaveAt {
    step: usize,
    state: Option<PenaltyState>,
}

impl Observer for SaveAt {
    fn observe(&mut self, view: &StepView<'_>) {
        if view.state.step == self.step {
            self.state = Some(view.state.clone());
        }
    }
}

fn ladder(cfg: &RunConfig, model: Option<&NoiseModel>) -> CliResult<Option<WienerIncrements>> {
    let steps = cfg.scheme.steps;
    let k = cfg.scheme.horizon / steps as f64;
    model
        .map(|m| m.sample_increments(steps, k, cfg.noise.seed, cfg.noise.path))
        .transpose()
        .map_err(Into::into)
}

fn simulate(
    cfg: &RunConfig,
    dir: &Path,
    hash: &str,
    resume: Option<&Path>,
    checkpoint_at: Option<usize>,
) -> CliResult<Outcome> {
    let steps = cfg.scheme.steps;
    let scheme = cfg.scheme.scheme;
    let params = cfg.scheme_params(steps)?;
    let model = cfg.noise_model()?;
    let incs = ladder(cfg, model.as_ref())?;
    let noise = match (&model, &incs) {
        (Some(model), Some(increments)) => Some(NoiseInput { model, increments }),
        _ => None,
    };
    let mut save = SaveAt {
        step: checkpoint_at.unwrap_or(usize::MAX),
        state: None,
    };
    let rec = match resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if ck.ladder.as_ref() != incs.as_ref().map(|w| w.meta()) {
                return Err(CliError::Validation(format!(
                    "{} was written for a different noise path",
                    path.display()
                )));
            }
            resume_trajectory(
                scheme,
                &params,
                ck.state,
                noise,
                &cfg.solver_opts(),
                &mut [&mut save],
            )?
        }
        None => {
            let u0 = cfg.initial_condition().build(cfg.grid_obj()?);
            run_trajectory(
                scheme,
                &params,
                &u0,
                noise,
                &cfg.solver_opts(),
                &mut [&mut save],
            )?
        }
    };
    write_csv(&rec.diagnostics, &dir.join("trajectory.csv"), hash)?;
    let final_ck = Checkpoint {
        state: rec.final_state.clone(),
        ladder: rec.ladder,
    };
    final_ck.save(dir.join("final_state.bin"))?;
    let u = FieldSnapshot::from(rec.final_state.u.clone());
    save_field(dir.join("final_u.bin"), &u)?;
    let dump = dir.join("final_u.txt");
    fs::write(&dump, text_dump(&u)).map_err(|e| CliError::io(&dump, e))?;
    if let Some(state) = save.state {
        let ck = Checkpoint {
            state,
            ladder: rec.ladder,
        };
        ck.save(dir.join(format!("checkpoint_{}.bin", ck.state.step)))?;
    } else if let Some(s) = checkpoint_at {
        warn!("checkpoint step {s} was not reached");
    }
    let max_div = rec
        .diagnostics
        .iter()
        .map(|d| d.div_residual)
        .fold(0.0, f64::max);
    let max_pen = rec
        .diagnostics
        .iter()
        .map(|d| d.penalty_residual)
        .fold(0.0, f64::max);
    Ok(Outcome::ok(vec![
        format!(
            "{scheme}: {} steps, final energy {:e}",
            rec.diagnostics.len(),
            rec.final_state.u.sobolev_sq(0.0)
        ),
        format!("max div residual {max_div:e}, max penalty residual {max_pen:e}"),
    ]))
}

fn fit_or_warn(name: &str, ks: &[f64], ys: &[f64]) -> Option<RateRow> {
    match fit_rate(ks, ys) {
        Ok(fit) => Some(RateRow {
            response: name.to_string(),
            fit,
        }),
        Err(e) => {
            warn!("no rate for {name}: {e}");
            None
        }
    }
}

/// `C` for the exceedance curve: the median of `E^M` at the coarsest level,
/// with failed paths counted as infinite.
pub fn coarsest_median(reports: &[ErrorReport]) -> f64 {
    let values: Vec<f64> = reports[0]
        .paths
        .iter()
        .map(|p| p.em().unwrap_or(f64::INFINITY))
        .collect();
    median(&values)
}

fn convergence(cfg: &RunConfig, dir: &Path, hash: &str) -> CliResult<Outcome> {
    if cfg.study.levels.len() < 3 {
        return Err(CliError::Validation(format!(
            "study.levels: a rate study needs at least 3 levels, got {}",
            cfg.study.levels.len()
        )));
    }
    let study_cfg = cfg.study_config()?;
    info!(
        "running {} paths over levels {:?}",
        study_cfg.paths, study_cfg.levels
    );
    let res = run_mc_study(&study_cfg)?;
    write_csv(&error_rows(&res.reports), &dir.join("errors.csv"), hash)?;

    let ks: Vec<f64> = res.reports.iter().map(|r| r.level.k).collect();
    let c = coarsest_median(&res.reports);
    let r = cfg.study.rate_r;
    let exc: Vec<_> = res
        .reports
        .iter()
        .map(|rep| estimate_exceedance(rep, c, r))
        .collect();
    write_csv(&exc, &dir.join("exceedance.csv"), hash)?;

    let mean_em: Vec<f64> = res.reports.iter().map(ErrorReport::mean_em).collect();
    let mean_tem: Vec<f64> = res.reports.iter().map(ErrorReport::mean_tem).collect();
    let fractions: Vec<f64> = exc.iter().map(|e| e.fraction).collect();
    let mut rates: Vec<RateRow> = [
        fit_or_warn("mean_EM", &ks, &mean_em),
        fit_or_warn("mean_tEM", &ks, &mean_tem),
        fit_or_warn("exceedance", &ks, &fractions),
    ]
    .into_iter()
    .flatten()
    .collect();

    let mut summary = vec![format!("C = {c:e}, r = {r}")];
    for ((rep, e), t) in res.reports.iter().zip(&exc).zip(&mean_tem) {
        summary.push(format!(
            "level {} (M = {}): mean tEM {t:e}, P[EM >= C k^r] = {:.3} ± {:.3}, {} failed",
            rep.level.level,
            rep.level.steps,
            e.fraction,
            e.ci_half_width,
            rep.blown_up()
        ));
    }

    if let (Some(z), Some(sets)) = (&res.z_reports, &res.sample_sets) {
        write_csv(&error_rows(z), &dir.join("z_errors.csv"), hash)?;
        let z_mean: Vec<f64> = z.iter().map(|r| r.mean_of(|t| t.velocity())).collect();
        rates.extend(fit_or_warn("z_velocity", &ks, &z_mean));
        let mut rows = Vec::new();
        for (rep, level) in res.reports.iter().zip(sets) {
            let th = cfg
                .threshold_rule()
                .resolve(level, rep.level.k, cfg.scheme.eta)?;
            let stats = sample_set_membership(level, th)?;
            rows.push(SampleSetRow {
                level: rep.level.level,
                k: rep.level.k,
                kappa: [th.kappa1, th.kappa2, th.kappa3],
                complement: stats.complement,
                intersection: stats.intersection(),
            });
        }
        write_csv(&rows, &dir.join("sample_sets.csv"), hash)?;
        summary.push("increment condition checked on adjacent coarse time pairs only".into());
    }
    write_csv(&rates, &dir.join("rates.csv"), hash)?;
    for row in &rates {
        summary.push(format!("slope[{}] = {:.4}", row.response, row.fit.slope));
    }
    Ok(Outcome::ok(summary))
}

/// Largest relative spread of a stability mean across levels that still counts as bounded.
pub const STABILITY_SPREAD: f64 = 0.2;

fn stability(cfg: &RunConfig, dir: &Path, hash: &str) -> CliResult<Outcome> {
    let levels = run_stability_sweep(&cfg.study_config()?)?;
    write_csv(&levels, &dir.join("stability.csv"), hash)?;
    let spreads = [
        (
            "max_energy",
            relative_spread(&levels.iter().map(|l| l.mean.max_energy).collect::<Vec<_>>()),
        ),
        (
            "grad_sum",
            relative_spread(&levels.iter().map(|l| l.mean.grad_sum).collect::<Vec<_>>()),
        ),
        (
            "pressure_sum",
            relative_spread(
                &levels
                    .iter()
                    .map(|l| l.mean.pressure_sum)
                    .collect::<Vec<_>>(),
            ),
        ),
    ];
    let passed = spreads.iter().all(|(_, s)| *s < STABILITY_SPREAD);
    Ok(Outcome {
        passed,
        summary: spreads
            .iter()
            .map(|(n, s)| format!("{n}: relative spread {s:.4}"))
            .collect(),
    })
}

/// Accepted deviation of the fitted Taylor–Green slope from first order.
pub const TAYLOR_GREEN_SLOPE_TOL: f64 = 0.15;

fn taylor_green(cfg: &RunConfig, dir: &Path, hash: &str) -> CliResult<Outcome> {
    let s = &cfg.scheme;
    let (levels, fit) = taylor_green_convergence(
        s.scheme,
        cfg.grid_obj()?,
        s.nu,
        s.horizon,
        s.initial_amplitude,
        &cfg.study.levels,
        s.eta,
        s.alpha,
        &cfg.solver_opts(),
    )?;
    write_csv(&levels, &dir.join("taylor_green.csv"), hash)?;
    let fit: RateFit = fit.ok_or_else(|| {
        CliError::Validation("study.levels: a rate fit needs at least 3 levels".into())
    })?;
    let row = RateRow {
        response: "max_error".into(),
        fit,
    };
    write_csv(std::slice::from_ref(&row), &dir.join("rates.csv"), hash)?;
    let slope = row.fit.slope;
    let checked = matches!(s.scheme, Scheme::Direct | Scheme::StokesDirect);
    Ok(Outcome {
        passed: !checked || (slope - 1.0).abs() <= TAYLOR_GREEN_SLOPE_TOL,
        summary: vec![format!("{}: fitted slope {slope:.4}", s.scheme)],
    })
}

fn decompose(cfg: &RunConfig, dir: &Path, hash: &str) -> CliResult<Outcome> {
    let steps = cfg.scheme.steps;
    let params = cfg.scheme_params(steps)?;
    let grid = cfg.grid_obj()?;
    let model = match cfg.noise_model()? {
        Some(m) => m,
        None => NoiseModel::new(grid, cfg.noise_cutoff(), cfg.noise.gamma)?,
    };
    // a disabled noise source becomes a zero-variance ladder on the same grid
    let k = if cfg.noise.enabled { params.k() } else { 0.0 };
    let incs = model.sample_increments(steps, k, cfg.noise.seed, cfg.noise.path)?;
    let u0 = cfg.initial_condition().build(grid);
    let steps_out = run_decomposition(
        &params,
        &u0,
        NoiseInput {
            model: &model,
            increments: &incs,
        },
        &cfg.solver_opts(),
    )?;
    write_csv(&steps_out, &dir.join("decomposition.csv"), hash)?;
    let bound = 10.0 * cfg.scheme.picard_tol;
    let worst = steps_out
        .iter()
        .map(|s| s.velocity_residual / s.scale.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(Outcome {
        passed: worst <= bound,
        summary: vec![format!(
            "max relative decomposition residual {worst:e} (bound {bound:e})"
        )],
    })
}

/// Accepted band for `E‖ΔW‖² / (k trace Q)`.
pub const NOISE_RATIO_BAND: (f64, f64) = (0.9, 1.1);

fn noise_check(cfg: &RunConfig, dir: &Path, hash: &str) -> CliResult<Outcome> {
    let model = cfg
        .noise_model()?
        .ok_or_else(|| CliError::Validation("noise.enabled is false".into()))?;
    let k = cfg.scheme.horizon / cfg.scheme.steps as f64;
    let check = noise_statistics(&model, cfg.study.noise_samples, k, cfg.noise.seed)?;
    let ratio_ok = (NOISE_RATIO_BAND.0..=NOISE_RATIO_BAND.1).contains(&check.energy_ratio);
    let div_ok = check.max_divergence <= 1e-12;
    let rows = vec![
        CheckRow {
            check: "energy_ratio".into(),
            value: check.energy_ratio,
            passed: ratio_ok,
        },
        CheckRow {
            check: "max_divergence".into(),
            value: check.max_divergence,
            passed: div_ok,
        },
        CheckRow {
            check: "telescoping_exact".into(),
            value: f64::from(u8::from(check.telescoping_exact)),
            passed: check.telescoping_exact,
        },
        CheckRow {
            check: "trace".into(),
            value: model.trace(),
            passed: true,
        },
    ];
    write_csv(&rows, &dir.join("noise_check.csv"), hash)?;
    Ok(Outcome {
        passed: ratio_ok && div_ok && check.telescoping_exact,
        summary: rows
            .iter()
            .map(|r| {
                format!(
                    "{}: {:e} ({})",
                    r.check,
                    r.value,
                    if r.passed { "ok" } else { "FAILED" }
                )
            })
            .collect(),
    })
}
