use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};
use crate::noise::{LadderMeta, NoiseModel, WienerIncrements};
use crate::nonlinear::PaddedWorkspace;
use crate::spectral::{Field, SpectralScalar, SpectralVector};

use super::params::{SchemeParams, SolverOpts};
use super::step::{
    deterministic_penalty_step, direct_step, penalty_step, stokes_direct_step, stokes_penalty_step,
    PenaltyState, StepInfo,
};

/// Time-stepping algorithm selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Main penalty–projection algorithm.
    Penalty,
    /// Direct discretization in the divergence-free space.
    Direct,
    /// Penalty–projection without convection (first auxiliary algorithm).
    StokesPenalty,
    /// Direct discretization without convection.
    StokesDirect,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Penalty => "penalty",
            Scheme::Direct => "direct",
            Scheme::StokesPenalty => "stokes-penalty",
            Scheme::StokesDirect => "stokes-direct",
        }
    }

    pub fn is_penalized(&self) -> bool {
        matches!(self, Scheme::Penalty | Scheme::StokesPenalty)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "penalty" => Ok(Scheme::Penalty),
            "direct" => Ok(Scheme::Direct),
            "stokes-penalty" => Ok(Scheme::StokesPenalty),
            "stokes-direct" => Ok(Scheme::StokesDirect),
            other => Err(Error::param(
                "scheme.scheme",
                format!("unknown scheme `{other}`"),
            )),
        }
    }
}

/// Scalar summary of one step. Energies are squared `L²` norms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub t: f64,
    /// `‖u^ℓ‖²`
    pub energy: f64,
    /// `‖∇u^ℓ‖²`
    pub enstrophy: f64,
    pub div_residual: f64,
    pub penalty_residual: f64,
    pub picard_iters: usize,
    /// `‖∇ũ^ℓ‖²`
    pub tilde_grad_sq: f64,
    /// `‖p^ℓ‖²`
    pub pressure_sq: f64,
}

impl StepDiagnostics {
    fn of(state: &PenaltyState, info: &StepInfo, t: f64) -> Self {
        StepDiagnostics {
            step: state.step,
            t,
            energy: state.u.sobolev_sq(0.0),
            enstrophy: state.u.sobolev_sq(1.0),
            div_residual: info.div_residual,
            penalty_residual: info.penalty_residual,
            picard_iters: info.picard_iters,
            tilde_grad_sq: state.u_tilde.sobolev_sq(1.0),
            pressure_sq: state.p.sobolev_sq(0.0),
        }
    }
}

/// What an observer sees after each step.
pub struct StepView<'a> {
    pub scheme: Scheme,
    pub t: f64,
    pub state: &'a PenaltyState,
    pub info: &'a StepInfo,
}

/// Per-step callback. Observers must not influence the trajectory.
pub trait Observer {
    fn observe(&mut self, view: &StepView<'_>);
}

/// Stored fields at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    pub u: SpectralVector,
    pub p: SpectralScalar,
    pub u_tilde: SpectralVector,
}

/// Keeps the fields of every `every`-th step.
#[derive(Clone, Debug)]
pub struct Sampler {
    every: usize,
    pub samples: Vec<Sample>,
}

impl Sampler {
    pub fn new(every: usize) -> Self {
        assert!(every >= 1);
        Sampler {
            every,
            samples: Vec::new(),
        }
    }
}

impl Observer for Sampler {
    fn observe(&mut self, view: &StepView<'_>) {
        if view.state.step.is_multiple_of(self.every) {
            self.samples.push(Sample {
                step: view.state.step / self.every,
                t: view.t,
                u: view.state.u.clone(),
                p: view.state.p.clone(),
                u_tilde: view.state.u_tilde.clone(),
            });
        }
    }
}

/// Noise driving a trajectory: the model and the (already coarsened) ladder.
#[derive(Clone, Copy)]
pub struct NoiseInput<'a> {
    pub model: &'a NoiseModel,
    pub increments: &'a WienerIncrements,
}

impl NoiseInput<'_> {
    fn check(&self, params: &SchemeParams) -> Result<()> {
        let w = self.increments;
        if w.steps() != params.steps() {
            return Err(Error::TimeGridMismatch(format!(
                "ladder has {} steps, scheme expects {}",
                w.steps(),
                params.steps()
            )));
        }
        if (w.step_len() - params.k()).abs() > 1e-12 * params.k() {
            return Err(Error::TimeGridMismatch(format!(
                "ladder step {} differs from k = {}",
                w.step_len(),
                params.k()
            )));
        }
        if w.channels() != self.model.channels() {
            return Err(Error::CouplingMismatch("ladder/model channel count".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub scheme: Scheme,
    pub params: SchemeParams,
    pub initial: PenaltyState,
    pub final_state: PenaltyState,
    pub diagnostics: Vec<StepDiagnostics>,
    pub ladder: Option<LadderMeta>,
}

/// Projects `u0` onto divergence-free fields if it carries divergence above roundoff.
pub fn prepare_initial(u0: SpectralVector) -> SpectralVector {
    let div = u0.divergence().l2();
    let scale = u0.h1();
    if div > 1e-12 * scale {
        warn!(
            "initial velocity has divergence {div:e} (relative {:e}); Leray-projecting",
            div / scale
        );
        u0.leray_project()
    } else {
        u0.without_mean()
    }
}

/// Advances `scheme` for all `params.steps()` steps from `u0`.
pub fn run_trajectory(
    scheme: Scheme,
    params: &SchemeParams,
    u0: &SpectralVector,
    noise: Option<NoiseInput<'_>>,
    opts: &SolverOpts,
    observers: &mut [&mut dyn Observer],
) -> Result<TrajectoryRecord> {
    let start = PenaltyState::initial(prepare_initial(u0.clone()));
    resume_trajectory(scheme, params, start, noise, opts, observers)
}

/// Advances from a checkpointed state at step `start.step` to `params.steps()`.
pub fn resume_trajectory(
    scheme: Scheme,
    params: &SchemeParams,
    start: PenaltyState,
    noise: Option<NoiseInput<'_>>,
    opts: &SolverOpts,
    observers: &mut [&mut dyn Observer],
) -> Result<TrajectoryRecord> {
    params.validate()?;
    opts.validate()?;
    if let Some(n) = &noise {
        n.check(params)?;
        start.grid().check_same(n.model.grid())?;
    }
    if start.step > params.steps() {
        return Err(Error::OutOfRange {
            index: start.step,
            max: params.steps(),
        });
    }
    let grid = *start.grid();
    let mut ws = PaddedWorkspace::new(grid);
    let zero = SpectralVector::zeros(grid);
    let mut state = start.clone();
    let mut diagnostics = Vec::with_capacity(params.steps() - start.step);
    for step in start.step + 1..=params.steps() {
        let dw = match &noise {
            Some(n) => n.model.increment_field(n.increments, step)?,
            None => zero.clone(),
        };
        let (next, info) =
            advance(scheme, &state, params, &dw, &mut ws, opts).map_err(|e| e.at_step(step))?;
        state = next;
        let t = step as f64 * params.k();
        diagnostics.push(StepDiagnostics::of(&state, &info, t));
        let view = StepView {
            scheme,
            t,
            state: &state,
            info: &info,
        };
        for o in observers.iter_mut() {
            o.observe(&view);
        }
    }
    Ok(TrajectoryRecord {
        scheme,
        params: *params,
        initial: start,
        final_state: state,
        diagnostics,
        ladder: noise.map(|n| *n.increments.meta()),
    })
}

fn advance(
    scheme: Scheme,
    state: &PenaltyState,
    params: &SchemeParams,
    dw: &SpectralVector,
    ws: &mut PaddedWorkspace,
    opts: &SolverOpts,
) -> Result<(PenaltyState, StepInfo)> {
    match scheme {
        Scheme::Penalty => penalty_step(state, params, dw, ws, opts),
        Scheme::StokesPenalty => stokes_penalty_step(state, params, dw, opts),
        Scheme::Direct | Scheme::StokesDirect => {
            let (u, p, info) = if scheme == Scheme::Direct {
                direct_step(&state.u, params, dw, ws, opts)?
            } else {
                stokes_direct_step(&state.u, params, dw)
            };
            let g = *u.grid();
            Ok((
                PenaltyState {
                    u_tilde: u.clone(),
                    u,
                    phi: SpectralScalar::zeros(g),
                    p,
                    p_tilde: SpectralScalar::zeros(g),
                    step: state.step + 1,
                },
                info,
            ))
        }
    }
}

/// Gap between the main scheme and the sum of the two auxiliary schemes at one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompositionStep {
    pub step: usize,
    /// `‖u^{ε,ℓ} - (z^ℓ + v^ℓ)‖`
    pub velocity_residual: f64,
    /// `‖z^ℓ‖ + ‖v^ℓ‖`
    pub scale: f64,
    /// `‖p^{ε,ℓ} - (π^ℓ + ρ^ℓ)‖`
    pub pressure_residual: f64,
    pub pressure_scale: f64,
    /// `‖φ^ℓ - (ξ^ℓ + ψ^ℓ)‖`
    pub phi_residual: f64,
}

/// Runs the main scheme, the first auxiliary scheme (from `z⁰ = 0`) and the
/// second auxiliary scheme (from `v⁰ = u0`) on the same noise, step by step.
pub fn run_decomposition(
    params: &SchemeParams,
    u0: &SpectralVector,
    noise: NoiseInput<'_>,
    opts: &SolverOpts,
) -> Result<Vec<DecompositionStep>> {
    params.validate()?;
    opts.validate()?;
    noise.check(params)?;
    let u0 = prepare_initial(u0.clone());
    let grid = *u0.grid();
    let mut ws = PaddedWorkspace::new(grid);
    let mut main = PenaltyState::initial(u0.clone());
    let mut z = PenaltyState::zeros(grid);
    let mut v = PenaltyState::initial(u0);
    let mut out = Vec::with_capacity(params.steps());
    for step in 1..=params.steps() {
        let dw = noise.model.increment_field(noise.increments, step)?;
        let z_prev_tilde = z.u_tilde.clone();
        let wrap = |e: Error| e.at_step(step);
        main = penalty_step(&main, params, &dw, &mut ws, opts)
            .map_err(wrap)?
            .0;
        z = stokes_penalty_step(&z, params, &dw, opts).map_err(wrap)?.0;
        v = deterministic_penalty_step(&v, params, &z.u_tilde, &z_prev_tilde, &mut ws, opts)
            .map_err(wrap)?
            .0;
        let sum_u = &z.u + &v.u;
        let sum_p = &z.p + &v.p;
        let sum_phi = &z.phi + &v.phi;
        out.push(DecompositionStep {
            step,
            velocity_residual: (&main.u - &sum_u).l2(),
            scale: z.u.l2() + v.u.l2(),
            pressure_residual: (&main.p - &sum_p).l2(),
            pressure_scale: z.p.l2() + v.p.l2(),
            phi_residual: (&main.phi - &sum_phi).l2(),
        });
    }
    Ok(out)
}
