//! Acceptance checks, run in sequence so the timings are not shared with
//! other tests. Each prints one `criterion N: PASS|FAIL` line with the
//! measured quantities and the tolerance it was held to.

use std::fs;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use penproj::experiments::{
    estimate_exceedance, fit_rate, noise_statistics, relative_spread, run_mc_study,
    run_stability_sweep, taylor_green_convergence, ErrorReport, StudyConfig, StudyResult,
};
use penproj::init::random_vector;
use penproj::nonlinear::{trilinear, PaddedWorkspace};
use penproj::schemes::{run_decomposition, run_trajectory, NoiseInput, Scheme};
use penproj::spectral::Field;
use penproj_cli::commands::coarsest_median;
use penproj_cli::output::{error_rows, write_csv};
use penproj_cli::{dispatch, Command, RunConfig};

const CONSTRAINT_TOL: f64 = 1e-12;
const TRILINEAR_TOL: f64 = 1e-12;
const DECOMPOSITION_TOL: f64 = 1e-9;
const TG_SLOPE: (f64, f64) = (0.85, 1.15);
const NOISE_BAND: (f64, f64) = (0.9, 1.1);
const STABILITY_SPREAD: f64 = 0.2;
const MONOTONE_SLACK: f64 = 0.10;
const STRONG_SLOPE: f64 = 0.15;
const EXCEEDANCE_R: f64 = 0.2;
const Z_SLOPE_FACTOR: f64 = 0.8;

fn verdict(n: u32, pass: bool, detail: String, elapsed: Duration, budget: Duration) -> bool {
    let ok = pass && elapsed < budget;
    println!(
        "criterion {n}: {} | {detail} | {:.2} s of {:.0} s",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    ok
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn criterion_01_constraints_hold_every_step() -> bool {
    let cfg = RunConfig::default();
    let t0 = Instant::now();
    let model = cfg.noise_model().unwrap().unwrap();
    let params = cfg.scheme_params(64).unwrap();
    let incs = model
        .sample_increments(64, params.k(), cfg.noise.seed, 0)
        .unwrap();
    let u0 = cfg.initial_condition().build(cfg.grid_obj().unwrap());
    let rec = run_trajectory(
        Scheme::Penalty,
        &params,
        &u0,
        Some(NoiseInput {
            model: &model,
            increments: &incs,
        }),
        &cfg.solver_opts(),
        &mut [],
    )
    .unwrap();
    let elapsed = t0.elapsed();
    let div = rec
        .diagnostics
        .iter()
        .map(|d| d.div_residual)
        .fold(0.0, f64::max);
    let pen = rec
        .diagnostics
        .iter()
        .map(|d| d.penalty_residual)
        .fold(0.0, f64::max);
    let pass = rec.diagnostics.len() == 64 && div <= CONSTRAINT_TOL && pen <= CONSTRAINT_TOL;
    verdict(
        1,
        pass,
        format!("max div {div:.2e}, max penalty {pen:.2e} (tol {CONSTRAINT_TOL:e})"),
        elapsed,
        secs(10),
    )
}

fn criterion_02_trilinear_identities() -> bool {
    let grid = RunConfig::default().grid_obj().unwrap();
    let t0 = Instant::now();
    let mut ws = PaddedWorkspace::new(grid);
    let (mut worst_sym, mut worst_skew) = (0.0f64, 0.0f64);
    for i in 0..100u64 {
        let u = random_vector(grid, 3 * i + 1, 1.0);
        let v = random_vector(grid, 3 * i + 2, 1.0);
        let w = random_vector(grid, 3 * i + 3, 1.0);
        let (nu, nv, nw) = (u.h1(), v.h1(), w.h1());
        let b_vv = trilinear(&mut ws, &u, &v, &v).unwrap();
        let skew =
            trilinear(&mut ws, &u, &v, &w).unwrap() + trilinear(&mut ws, &u, &w, &v).unwrap();
        worst_sym = worst_sym.max(b_vv.abs() / (nu * nv * nv));
        worst_skew = worst_skew.max(skew.abs() / (nu * nv * nw));
    }
    let elapsed = t0.elapsed();
    let pass = worst_sym <= TRILINEAR_TOL && worst_skew <= TRILINEAR_TOL;
    verdict(
        2,
        pass,
        format!("max |b(u,v,v)| rel {worst_sym:.2e}, max |b(u,v,w)+b(u,w,v)| rel {worst_skew:.2e} (tol {TRILINEAR_TOL:e})"),
        elapsed,
        secs(5)
    )
}

fn criterion_03_decomposition_identity() -> bool {
    let cfg = RunConfig::default();
    assert_eq!(cfg.scheme.picard_tol, 1e-11);
    let t0 = Instant::now();
    let model = cfg.noise_model().unwrap().unwrap();
    let params = cfg.scheme_params(64).unwrap();
    let incs = model
        .sample_increments(64, params.k(), cfg.noise.seed, 0)
        .unwrap();
    let u0 = cfg.initial_condition().build(cfg.grid_obj().unwrap());
    let steps = run_decomposition(
        &params,
        &u0,
        NoiseInput {
            model: &model,
            increments: &incs,
        },
        &cfg.solver_opts(),
    )
    .unwrap();
    let elapsed = t0.elapsed();
    let residual = steps
        .iter()
        .map(|s| s.velocity_residual)
        .fold(0.0, f64::max);
    let scale = steps.iter().map(|s| s.scale).fold(0.0, f64::max);
    let pass = steps.len() == 64 && residual <= DECOMPOSITION_TOL * scale;
    verdict(
        3,
        pass,
        format!("max residual {residual:.2e} vs {DECOMPOSITION_TOL:e} x {scale:.3e}"),
        elapsed,
        secs(30),
    )
}

fn criterion_04_taylor_green_first_order() -> bool {
    let cfg = RunConfig::default();
    let t0 = Instant::now();
    let (levels, fit) = taylor_green_convergence(
        Scheme::Direct,
        cfg.grid_obj().unwrap(),
        1.0,
        0.5,
        1.0,
        &[32, 64, 128, 256],
        cfg.scheme.eta,
        cfg.scheme.alpha,
        &cfg.solver_opts(),
    )
    .unwrap();
    let elapsed = t0.elapsed();
    let slope = fit.unwrap().slope;
    let errors: Vec<String> = levels
        .iter()
        .map(|l| format!("{:.3e}", l.max_error))
        .collect();
    let pass = (TG_SLOPE.0..=TG_SLOPE.1).contains(&slope);
    verdict(
        4,
        pass,
        format!(
            "errors [{}], slope {slope:.4} (want {:?})",
            errors.join(", "),
            TG_SLOPE
        ),
        elapsed,
        secs(60),
    )
}

fn criterion_05_noise_statistics() -> bool {
    let cfg = RunConfig::default();
    let t0 = Instant::now();
    let model = cfg.noise_model().unwrap().unwrap();
    let check = noise_statistics(&model, 1000, cfg.scheme.horizon / 64.0, cfg.noise.seed).unwrap();
    let elapsed = t0.elapsed();
    let pass =
        (NOISE_BAND.0..=NOISE_BAND.1).contains(&check.energy_ratio) && check.telescoping_exact;
    verdict(
        5,
        pass,
        format!(
            "energy ratio {:.4} (want {NOISE_BAND:?}), telescoping exact {}",
            check.energy_ratio, check.telescoping_exact
        ),
        elapsed,
        secs(10),
    )
}

fn criterion_06_stability_is_uniform_in_k() -> bool {
    let cfg = StudyConfig {
        paths: 32,
        levels: vec![32, 64, 128],
        reference_steps: 128,
        ..RunConfig::default().study_config().unwrap()
    };
    let t0 = Instant::now();
    let levels = run_stability_sweep(&cfg).unwrap();
    let elapsed = t0.elapsed();
    let col = |f: fn(&penproj::experiments::StabilityLevel) -> f64| {
        relative_spread(&levels.iter().map(f).collect::<Vec<_>>())
    };
    let spreads = [
        col(|l| l.mean.max_energy),
        col(|l| l.mean.grad_sum),
        col(|l| l.mean.pressure_sum),
    ];
    let failed: usize = levels.iter().map(|l| l.failed_paths).sum();
    let pass = failed == 0 && spreads.iter().all(|&s| s < STABILITY_SPREAD);
    verdict(
        6,
        pass,
        format!(
            "spreads max energy {:.3}, grad sum {:.3}, pressure sum {:.3} (want < {STABILITY_SPREAD}), {failed} failed paths",
            spreads[0], spreads[1], spreads[2]
        ),
        elapsed,
        secs(600)
    )
}

struct DefaultStudy {
    result: StudyResult,
    errors_csv: PathBuf,
    elapsed: Duration,
    _dir: tempfile::TempDir,
}

fn default_study() -> &'static DefaultStudy {
    static STUDY: OnceLock<DefaultStudy> = OnceLock::new();
    STUDY.get_or_init(|| {
        let cfg = RunConfig::default();
        let t0 = Instant::now();
        let result = run_mc_study(&cfg.study_config().unwrap()).unwrap();
        let elapsed = t0.elapsed();
        let dir = tempfile::tempdir().unwrap();
        let errors_csv = dir.path().join("errors.csv");
        write_csv(
            &error_rows(&result.reports),
            &errors_csv,
            &cfg.manifest_hash(),
        )
        .unwrap();
        DefaultStudy {
            result,
            errors_csv,
            elapsed,
            _dir: dir,
        }
    })
}

fn ks(reports: &[ErrorReport]) -> Vec<f64> {
    reports.iter().map(|r| r.level.k).collect()
}

fn criterion_07_strong_error_decreases() -> bool {
    let study = default_study();
    let reports = &study.result.reports;
    let means: Vec<f64> = reports.iter().map(ErrorReport::mean_tem).collect();
    let failed: usize = reports.iter().map(ErrorReport::blown_up).sum();
    let decreasing = means
        .windows(2)
        .all(|w| w[1] < w[0] * (1.0 + MONOTONE_SLACK));
    let slope = fit_rate(&ks(reports), &means)
        .map(|f| f.slope)
        .unwrap_or(f64::NAN);
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.3e}")).collect();
    verdict(
        7,
        decreasing && slope >= STRONG_SLOPE,
        format!(
            "mean tEM [{}], slope {slope:.3} (want >= {STRONG_SLOPE}), {failed} failed paths",
            shown.join(", ")
        ),
        study.elapsed,
        secs(3600),
    )
}

fn criterion_08_exceedance_nonincreasing() -> bool {
    let study = default_study();
    let reports = &study.result.reports;
    let c = coarsest_median(reports);
    let exc: Vec<_> = reports
        .iter()
        .map(|r| estimate_exceedance(r, c, EXCEEDANCE_R))
        .collect();
    let pass = exc
        .windows(2)
        .all(|w| w[1].fraction <= w[0].fraction + w[0].ci_half_width + w[1].ci_half_width);
    let shown: Vec<String> = exc
        .iter()
        .map(|e| format!("{:.3} ± {:.3}", e.fraction, e.ci_half_width))
        .collect();
    verdict(
        8,
        pass,
        format!(
            "C = {c:.3e}, r = {EXCEEDANCE_R}, P[EM >= C k^r] [{}]",
            shown.join(", ")
        ),
        study.elapsed,
        secs(3600),
    )
}

fn criterion_09_stokes_z_error_rate() -> bool {
    let mut cfg = RunConfig::default();
    cfg.apply_override("scheme.scheme=stokes-penalty", 1)
        .unwrap();
    cfg.study.paths = 32;
    let eta = cfg.scheme.eta;
    let t0 = Instant::now();
    let result = run_mc_study(&cfg.study_config().unwrap()).unwrap();
    let elapsed = t0.elapsed();
    // with the nonlinearity off the main scheme is the first auxiliary scheme
    let z = &result.reports;
    let velocity: Vec<f64> = z.iter().map(|r| r.mean_of(|t| t.velocity())).collect();
    let pressure: Vec<f64> = z.iter().map(|r| r.mean_of(|t| t.pressure_term)).collect();
    let v_slope = fit_rate(&ks(z), &velocity)
        .map(|f| f.slope)
        .unwrap_or(f64::NAN);
    let p_max = pressure.iter().copied().fold(0.0, f64::max);
    let want = Z_SLOPE_FACTOR * eta;
    verdict(
        9,
        v_slope >= want,
        format!("velocity error slope {v_slope:.3} (want >= {want:.2}); largest mean pressure term {p_max:.1e}"),
        elapsed,
        secs(600)
    )
}

fn criterion_10_reruns_are_byte_identical() -> bool {
    let first = default_study();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.output.dir = dir.path().to_path_buf();
    let t0 = Instant::now();
    let outcome = dispatch(&Command::Convergence, &cfg).unwrap();
    let elapsed = t0.elapsed();
    let a = fs::read(&first.errors_csv).unwrap();
    let b = fs::read(dir.path().join("errors.csv")).unwrap();
    verdict(
        10,
        outcome.passed && a == b,
        format!("errors.csv {} bytes, identical {}", a.len(), a == b),
        elapsed,
        secs(3600),
    )
}

fn main() {
    let criteria: [fn() -> bool; 10] = [
        criterion_01_constraints_hold_every_step,
        criterion_02_trilinear_identities,
        criterion_03_decomposition_identity,
        criterion_04_taylor_green_first_order,
        criterion_05_noise_statistics,
        criterion_06_stability_is_uniform_in_k,
        criterion_07_strong_error_decreases,
        criterion_08_exceedance_nonincreasing,
        criterion_09_stokes_z_error_rate,
        criterion_10_reruns_are_byte_identical,
    ];
    let failed = criteria.iter().filter(|c| !c()).count();
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
