//! Monte Carlo studies over coupled noise paths.

use rayon::prelude::*;

use super::errors::{
    compute_error_functionals, ErrorReport, ErrorTerms, LevelInfo, PathErrors, SampledRun,
};
use super::sample_sets::SampleSetQuantities;
use crate::error::{Error, Result};
use crate::init::{random_solenoidal, taylor_green};
use crate::noise::{LadderMeta, NoiseModel, WienerIncrements};
use crate::schemes::{
    prepare_initial, run_trajectory, Advection, NoiseInput, Sample, Sampler, Scheme, SchemeParams,
    SolverOpts, StepDiagnostics,
};
use crate::spectral::{Grid, SpectralVector};

/// Deterministic initial velocity shared by all paths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialCondition {
    Zero,
    TaylorGreen {
        amplitude: f64,
    },
    /// Random solenoidal field with spectral decay `decay`, rescaled to `l2_norm`.
    Random {
        seed: u64,
        decay: f64,
        l2_norm: f64,
    },
}

impl InitialCondition {
    pub fn build(&self, grid: Grid) -> SpectralVector {
        match *self {
            InitialCondition::Zero => SpectralVector::zeros(grid),
            InitialCondition::TaylorGreen { amplitude } => taylor_green(grid, amplitude),
            InitialCondition::Random {
                seed,
                decay,
                l2_norm,
            } => random_solenoidal(grid, seed, decay, l2_norm),
        }
    }
}

/// Noise family parameters: modes with `|n|∞ ≤ cutoff`, decay exponent `gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub cutoff: usize,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub grid: Grid,
    pub nu: f64,
    pub horizon: f64,
    pub eta: f64,
    pub alpha: f64,
    /// Fixed penalty parameter; `None` couples `ε = k^η` at every level.
    pub epsilon: Option<f64>,
    /// Step counts of the levels, coarsest first.
    pub levels: Vec<usize>,
    /// Step count of the reference run and of the sampled noise ladder.
    pub reference_steps: usize,
    pub paths: usize,
    pub base_seed: u64,
    /// `None` runs the deterministic problem.
    pub noise: Option<NoiseSpec>,
    pub initial: InitialCondition,
    pub opts: SolverOpts,
    pub advection: Advection,
    /// `false` drops the convection term from both the scheme and the reference.
    pub nonlinear: bool,
    /// Also run the Stokes schemes and collect sample-set quantities.
    pub sample_sets: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        let grid = Grid::periodic_2pi(32).expect("valid default grid");
        StudyConfig {
            grid,
            nu: 1.0,
            horizon: 0.5,
            eta: 0.4,
            alpha: 2.0,
            epsilon: None,
            levels: vec![16, 32, 64, 128],
            reference_steps: 1024,
            paths: 64,
            base_seed: 20_240_601,
            noise: Some(NoiseSpec {
                cutoff: NoiseModel::default_cutoff(32),
                gamma: NoiseModel::DEFAULT_GAMMA,
            }),
            initial: InitialCondition::Random {
                seed: 7,
                decay: 2.0,
                l2_norm: 1.0,
            },
            opts: SolverOpts::default(),
            advection: Advection::Implicit,
            nonlinear: true,
            sample_sets: false,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("scheme.horizon", "must be > 0"));
        }
        if self.levels.is_empty() {
            return Err(Error::param(
                "study.levels",
                "at least one level is required",
            ));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("study.levels", "must be strictly increasing"));
        }
        for &m in &self.levels {
            if m == 0 || !self.reference_steps.is_multiple_of(m) {
                return Err(Error::param(
                    "study.levels",
                    format!(
                        "{m} does not divide reference_steps = {}",
                        self.reference_steps
                    ),
                ));
            }
        }
        if self.paths == 0 {
            return Err(Error::param("study.paths", "must be >= 1"));
        }
        self.opts.validate()?;
        self.level_params(self.reference_steps)?;
        self.noise_model()?;
        Ok(())
    }

    pub fn noise_model(&self) -> Result<Option<NoiseModel>> {
        self.noise
            .map(|n| NoiseModel::new(self.grid, n.cutoff, n.gamma))
            .transpose()
    }

    pub fn level_params(&self, steps: usize) -> Result<SchemeParams> {
        let k = self.horizon / steps as f64;
        let p = match self.epsilon {
            None => SchemeParams::coupled(self.nu, k, steps, self.eta, self.alpha)?,
            Some(eps) => SchemeParams::uncoupled(self.nu, k, steps, eps, self.eta, self.alpha)?,
        };
        Ok(p.with_advection(self.advection))
    }

    pub fn level_info(&self, level: usize) -> Result<LevelInfo> {
        let steps = self.levels[level];
        let p = self.level_params(steps)?;
        Ok(LevelInfo {
            level,
            steps,
            k: p.k(),
            eps: p.epsilon(),
        })
    }

    fn schemes(&self) -> (Scheme, Scheme) {
        if self.nonlinear {
            (Scheme::Penalty, Scheme::Direct)
        } else {
            (Scheme::StokesPenalty, Scheme::StokesDirect)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    pub reports: Vec<ErrorReport>,
    /// Errors of the first auxiliary (Stokes) scheme, when sample sets were requested.
    pub z_reports: Option<Vec<ErrorReport>>,
    /// Per level, per path; `None` for failed paths.
    pub sample_sets: Option<Vec<Vec<Option<SampleSetQuantities>>>>,
}

struct Context {
    cfg: StudyConfig,
    model: Option<NoiseModel>,
    u0: SpectralVector,
    infos: Vec<LevelInfo>,
    sample_every: usize,
}

struct Reference {
    samples: Vec<Sample>,
    diagnostics: Vec<StepDiagnostics>,
    ladder: Option<LadderMeta>,
}

struct PathOutcome {
    main: Vec<PathErrors>,
    z: Option<Vec<PathErrors>>,
    quantities: Option<Vec<Option<SampleSetQuantities>>>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Checks that every coarse increment is the sum of its fine sub-increments.
pub fn check_telescoping(fine: &WienerIncrements, coarse: &WienerIncrements) -> Result<()> {
    if !fine.same_path(coarse)
        || coarse.steps() == 0
        || !fine.steps().is_multiple_of(coarse.steps())
    {
        return Err(Error::CouplingMismatch(
            "ladders come from different paths".into(),
        ));
    }
    let m = fine.steps() / coarse.steps();
    let c = fine.channels();
    for (s, row) in coarse.ticks().chunks_exact(c).enumerate() {
        let mut sum = vec![0i64; c];
        for fr in fine.ticks()[s * m * c..(s + 1) * m * c].chunks_exact(c) {
            for (a, b) in sum.iter_mut().zip(fr) {
                *a += b;
            }
        }
        if sum != row {
            return Err(Error::CouplingMismatch(format!(
                "coarse step {} does not telescope",
                s + 1
            )));
        }
    }
    if coarse.total_ticks() != fine.total_ticks() {
        return Err(Error::CouplingMismatch("terminal values differ".into()));
    }
    Ok(())
}

fn run_reference(
    ctx: &Context,
    scheme: Scheme,
    noise: Option<NoiseInput<'_>>,
) -> Result<Reference> {
    let params = ctx.cfg.level_params(ctx.cfg.reference_steps)?;
    let mut sampler = Sampler::new(ctx.sample_every);
    let rec = run_trajectory(
        scheme,
        &params,
        &ctx.u0,
        noise,
        &ctx.cfg.opts,
        &mut [&mut sampler],
    )?;
    Ok(Reference {
        samples: sampler.samples,
        diagnostics: rec.diagnostics,
        ladder: rec.ladder,
    })
}

/// Reference samples at the times of a level with `steps` steps, renumbered `1..=steps`.
fn at_level(ctx: &Context, reference: &Reference, steps: usize) -> Vec<Sample> {
    let stride = ctx.cfg.reference_steps / steps / ctx.sample_every;
    reference
        .samples
        .iter()
        .skip(stride - 1)
        .step_by(stride)
        .enumerate()
        .map(|(i, s)| Sample {
            step: i + 1,
            ..s.clone()
        })
        .collect()
}

/// Runs `scheme` at one level and compares it with `reference`.
fn level_errors(
    ctx: &Context,
    scheme: Scheme,
    level: usize,
    reference: &Reference,
    ref_at_level: &[Sample],
    fine: Option<&WienerIncrements>,
) -> Result<ErrorTerms> {
    let info = ctx.infos[level];
    let params = ctx.cfg.level_params(info.steps)?;
    let coarse = match fine {
        Some(f) => {
            let c = f.coarsen(ctx.cfg.reference_steps / info.steps)?;
            check_telescoping(f, &c)?;
            Some(c)
        }
        None => None,
    };
    let noise = match (&ctx.model, &coarse) {
        (Some(model), Some(c)) => Some(NoiseInput {
            model,
            increments: c,
        }),
        _ => None,
    };
    let mut sampler = Sampler::new(1);
    let rec = run_trajectory(
        scheme,
        &params,
        &ctx.u0,
        noise,
        &ctx.cfg.opts,
        &mut [&mut sampler],
    )?;
    compute_error_functionals(
        SampledRun {
            samples: &sampler.samples,
            ladder: rec.ladder.as_ref(),
        },
        SampledRun {
            samples: ref_at_level,
            ladder: reference.ladder.as_ref(),
        },
        ctx.cfg.nu,
        info.k,
    )
}

/// Numerical failures become a failed entry; anything else aborts the study.
fn record(path: u64, r: Result<ErrorTerms>) -> Result<PathErrors> {
    match r {
        Ok(t) => Ok(PathErrors::ok(path, t)),
        Err(e) if e.is_numerical() => Ok(PathErrors::failed(path, e)),
        Err(e) => Err(e),
    }
}

/// Keeps numerical failures as data and propagates everything else.
fn numerical_only<T>(r: Result<T>) -> Result<Result<T, String>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e) if e.is_numerical() => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

fn run_path(ctx: &Context, path: u64) -> Result<PathOutcome> {
    let cfg = &ctx.cfg;
    let fine = match &ctx.model {
        Some(m) => Some(m.sample_increments(
            cfg.reference_steps,
            cfg.horizon / cfg.reference_steps as f64,
            cfg.base_seed,
            path,
        )?),
        None => None,
    };
    let noise = match (&ctx.model, &fine) {
        (Some(model), Some(increments)) => Some(NoiseInput { model, increments }),
        _ => None,
    };
    let (scheme, ref_scheme) = cfg.schemes();
    let levels = cfg.levels.len();

    let run_family = |scheme: Scheme,
                      reference: &Result<Reference, String>|
     -> Result<Vec<(PathErrors, Vec<Sample>)>> {
        (0..levels)
            .map(|l| match reference {
                Ok(r) => {
                    let at = at_level(ctx, r, cfg.levels[l]);
                    let e = record(path, level_errors(ctx, scheme, l, r, &at, fine.as_ref()))?;
                    Ok((e, at))
                }
                Err(e) => Ok((
                    PathErrors::failed(path, format!("reference: {e}")),
                    Vec::new(),
                )),
            })
            .collect()
    };

    let reference = numerical_only(run_reference(ctx, ref_scheme, noise))?;
    let main = run_family(scheme, &reference)?;
    if !cfg.sample_sets {
        return Ok(PathOutcome {
            main: main.into_iter().map(|(e, _)| e).collect(),
            z: None,
            quantities: None,
        });
    }
    let z = if cfg.nonlinear {
        let z_ref = numerical_only(run_reference(ctx, Scheme::StokesDirect, noise))?;
        run_family(Scheme::StokesPenalty, &z_ref)?
            .into_iter()
            .map(|(e, _)| e)
            .collect()
    } else {
        main.iter().map(|(e, _)| e.clone()).collect::<Vec<_>>()
    };
    let quantities = (0..levels)
        .map(|l| {
            let (m, at) = &main[l];
            match (&reference, &z[l].terms, &m.terms) {
                (Ok(r), Some(zt), Some(_)) => SampleSetQuantities::from_reference(
                    &ctx.u0,
                    &r.diagnostics,
                    at,
                    Some(zt),
                    ctx.infos[l].k,
                    cfg.eta,
                )
                .map(Some),
                _ => Ok(None),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathOutcome {
        main: main.into_iter().map(|(e, _)| e).collect(),
        z: Some(z),
        quantities: Some(quantities),
    })
}

/// Runs every path of the study: samples the fine ladder, runs the
/// divergence-free reference on it and the penalty scheme at every level on
/// the coarsened ladder. Paths run in parallel; the result does not depend on
/// the thread count.
pub fn run_mc_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let infos = (0..cfg.levels.len())
        .map(|l| cfg.level_info(l))
        .collect::<Result<Vec<_>>>()?;
    let sample_every = cfg
        .levels
        .iter()
        .map(|&m| cfg.reference_steps / m)
        .fold(0, gcd);
    let ctx = Context {
        model: cfg.noise_model()?,
        u0: prepare_initial(cfg.initial.build(cfg.grid)),
        cfg: cfg.clone(),
        infos,
        sample_every,
    };
    let outcomes = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|p| run_path(&ctx, p))
        .collect::<Result<Vec<_>>>()?;

    let levels = cfg.levels.len();
    let gather = |pick: &dyn Fn(&PathOutcome) -> &[PathErrors]| -> Vec<ErrorReport> {
        (0..levels)
            .map(|l| ErrorReport {
                level: ctx.infos[l],
                paths: outcomes.iter().map(|o| pick(o)[l].clone()).collect(),
            })
            .collect()
    };
    let reports = gather(&|o| &o.main);
    let (z_reports, sample_sets) = if cfg.sample_sets {
        let z = gather(&|o| o.z.as_deref().expect("z errors collected"));
        let q = (0..levels)
            .map(|l| {
                outcomes
                    .iter()
                    .map(|o| o.quantities.as_ref().expect("quantities collected")[l])
                    .collect()
            })
            .collect();
        (Some(z), Some(q))
    } else {
        (None, None)
    };
    Ok(StudyResult {
        reports,
        z_reports,
        sample_sets,
    })
}
