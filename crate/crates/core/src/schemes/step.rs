//! Single time steps of the penalty–projection scheme, the direct
//! divergence-free scheme, and the two auxiliary schemes of the z/v splitting.

use crate::error::{Error, Result};
use crate::nonlinear::{b_tilde_apply, PaddedWorkspace};
use crate::spectral::{Field, Grid, SpectralScalar, SpectralVector};

use super::params::{Advection, SchemeParams, SolverOpts};

/// State advanced by the penalized schemes. The direct schemes reuse it with
/// `phi = 0` and `u_tilde = u`.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyState {
    /// End-of-step, divergence-free velocity.
    pub u: SpectralVector,
    pub phi: SpectralScalar,
    pub p: SpectralScalar,
    /// Penalized intermediate velocity of the last step.
    pub u_tilde: SpectralVector,
    pub p_tilde: SpectralScalar,
    pub step: usize,
}

impl PenaltyState {
    /// `u⁰ = u0`, `φ⁰ = p⁰ = p̃⁰ = 0`, `ũ⁰ = u0`.
    pub fn initial(u0: SpectralVector) -> Self {
        let g = *u0.grid();
        PenaltyState {
            u_tilde: u0.clone(),
            u: u0,
            phi: SpectralScalar::zeros(g),
            p: SpectralScalar::zeros(g),
            p_tilde: SpectralScalar::zeros(g),
            step: 0,
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::initial(SpectralVector::zeros(grid))
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }
}

/// Per-step solver report.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub picard_iters: usize,
    /// `‖div u^ℓ‖ / ‖u^ℓ‖₁`.
    pub div_residual: f64,
    /// `‖div ũ + ε p̃‖ / max(‖p̃‖, 1e-30)`; zero for the direct schemes.
    pub penalty_residual: f64,
}

/// Convective term entering a penalized step.
pub(crate) enum Convection<'a> {
    Off,
    /// `B̃(w, w)` for the unknown `w`.
    Own(&'a mut PaddedWorkspace),
    /// `B̃(w + z̃, w + z̃)` with a given shift and its previous-step value.
    Shifted {
        ws: &'a mut PaddedWorkspace,
        shift: &'a SpectralVector,
        shift_prev: &'a SpectralVector,
    },
}

/// Solves `(1 + νk|κ|²) w + (k/ε) κ(κ·w) = r` mode by mode.
pub(crate) fn solve_penalized(
    rhs: &SpectralVector,
    nu: f64,
    k: f64,
    epsilon: f64,
) -> SpectralVector {
    let b = k / epsilon;
    rhs.split_modes(|c1, c2, k1, k2, ksq| {
        let a = 1.0 + nu * k * ksq;
        let dot = (c1 * k1 + c2 * k2) / ksq;
        let (g1, g2) = (dot * k1, dot * k2);
        let ga = 1.0 / (a + b * ksq);
        ((c1 - g1) / a + g1 * ga, (c2 - g2) / a + g2 * ga)
    })
}

/// Solves `(1 + νk|κ|²) w = P r` on divergence-free fields.
pub(crate) fn solve_solenoidal(rhs: &SpectralVector, nu: f64, k: f64) -> SpectralVector {
    rhs.split_modes(|c1, c2, k1, k2, ksq| {
        let a = 1.0 + nu * k * ksq;
        let dot = (c1 * k1 + c2 * k2) / ksq;
        ((c1 - dot * k1) / a, (c2 - dot * k2) / a)
    })
}

/// Fixed-point iteration `w ← map(w)` until the relative update drops below tolerance.
pub(crate) fn picard(
    initial: SpectralVector,
    opts: &SolverOpts,
    mut map: impl FnMut(&SpectralVector) -> Result<SpectralVector>,
) -> Result<(SpectralVector, usize)> {
    let mut w = initial;
    let mut last = f64::INFINITY;
    let mut growing = 0;
    for it in 1..=opts.picard_max_iter {
        let next = map(&w)?;
        let diff = (&next - &w).l2();
        let scale = next.l2();
        let rel = if scale > 0.0 { diff / scale } else { diff };
        if !rel.is_finite() {
            return Err(Error::PicardDiverged {
                iterations: it,
                update: rel,
            });
        }
        w = next;
        if rel < opts.picard_tol {
            return Ok((w, it));
        }
        if rel > last {
            growing += 1;
            if growing >= 3 {
                return Err(Error::PicardDiverged {
                    iterations: it,
                    update: rel,
                });
            }
        } else {
            growing = 0;
        }
        last = rel;
    }
    Err(Error::PicardDiverged {
        iterations: opts.picard_max_iter,
        update: last,
    })
}

fn check_growth(
    new: &SpectralVector,
    prev: &SpectralVector,
    forcing: Option<&SpectralVector>,
    opts: &SolverOpts,
) -> Result<()> {
    let n = new.l2();
    let base = prev.l2() + forcing.map_or(0.0, |f| f.l2());
    let growth = if n == 0.0 { 0.0 } else { n / base.max(1e-300) };
    if !growth.is_finite() || growth > opts.divergence_guard {
        return Err(Error::BlowUp {
            growth,
            guard: opts.divergence_guard,
        });
    }
    Ok(())
}

fn relative(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Penalization, `φ` update and projection shared by all penalized schemes.
pub(crate) fn penalized_step(
    state: &PenaltyState,
    params: &SchemeParams,
    forcing: Option<&SpectralVector>,
    convection: Convection<'_>,
    opts: &SolverOpts,
) -> Result<(PenaltyState, StepInfo)> {
    let (nu, k, eps, alpha) = (params.nu(), params.k(), params.epsilon(), params.alpha());
    let lagged = params.advection() == Advection::Lagged;

    // u^{ℓ-1} + ΔW - k ∇φ^{ℓ-1}
    let mut rhs = state.u.clone();
    if let Some(f) = forcing {
        rhs += f;
    }
    rhs.axpy(-k, &state.phi.gradient());

    let (u_tilde, iters) = match convection {
        Convection::Off => (solve_penalized(&rhs, nu, k, eps), 0),
        Convection::Own(ws) => picard(state.u.clone(), opts, |w| {
            let adv = if lagged { &state.u_tilde } else { w };
            let mut r = rhs.clone();
            r.axpy(-k, &b_tilde_apply(ws, adv, w)?);
            Ok(solve_penalized(&r, nu, k, eps))
        })?,
        Convection::Shifted {
            ws,
            shift,
            shift_prev,
        } => {
            let adv_prev = lagged.then(|| &state.u_tilde + shift_prev);
            picard(state.u.clone(), opts, |w| {
                let total = w + shift;
                let adv = adv_prev.as_ref().unwrap_or(&total);
                let mut r = rhs.clone();
                r.axpy(-k, &b_tilde_apply(ws, adv, &total)?);
                Ok(solve_penalized(&r, nu, k, eps))
            })?
        }
    };

    let div_tilde = u_tilde.divergence();
    let p_tilde = div_tilde.scale(-1.0 / eps);
    // Δ(φ^ℓ - φ^{ℓ-1}) = (αk)⁻¹ div ũ
    let dphi = div_tilde.inv_laplacian()?.scale(1.0 / (alpha * k));
    let phi = &state.phi + &dphi;
    let mut u = u_tilde.clone();
    u.axpy(-alpha * k, &dphi.gradient());
    let mut p = &p_tilde + &phi;
    p.axpy(alpha, &dphi);

    check_growth(&u, &state.u, forcing, opts)?;

    let mut residual = div_tilde.clone();
    residual.axpy(eps, &p_tilde);
    let info = StepInfo {
        picard_iters: iters,
        div_residual: relative(u.divergence().l2(), u.h1()),
        penalty_residual: residual.l2() / p_tilde.l2().max(1e-30),
    };
    Ok((
        PenaltyState {
            u,
            phi,
            p,
            u_tilde,
            p_tilde,
            step: state.step + 1,
        },
        info,
    ))
}

/// One step of the main penalty–projection algorithm.
pub fn penalty_step(
    state: &PenaltyState,
    params: &SchemeParams,
    dw: &SpectralVector,
    ws: &mut PaddedWorkspace,
    opts: &SolverOpts,
) -> Result<(PenaltyState, StepInfo)> {
    penalized_step(state, params, Some(dw), Convection::Own(ws), opts)
}

/// First auxiliary algorithm: the penalty–projection step with no convection.
pub fn stokes_penalty_step(
    state: &PenaltyState,
    params: &SchemeParams,
    dw: &SpectralVector,
    opts: &SolverOpts,
) -> Result<(PenaltyState, StepInfo)> {
    penalized_step(state, params, Some(dw), Convection::Off, opts)
}

/// Second auxiliary algorithm: unforced penalty–projection step convected by
/// `ṽ + z̃`, where `z̃` is the same-step intermediate of the first auxiliary scheme.
pub fn deterministic_penalty_step(
    state: &PenaltyState,
    params: &SchemeParams,
    z_tilde: &SpectralVector,
    z_tilde_prev: &SpectralVector,
    ws: &mut PaddedWorkspace,
    opts: &SolverOpts,
) -> Result<(PenaltyState, StepInfo)> {
    penalized_step(
        state,
        params,
        None,
        Convection::Shifted {
            ws,
            shift: z_tilde,
            shift_prev: z_tilde_prev,
        },
        opts,
    )
}

/// Direct discretization in the divergence-free space. Returns the new
/// velocity and the pressure `p = -Δ⁻¹ div B̃(u, u)`.
pub fn direct_step(
    u_prev: &SpectralVector,
    params: &SchemeParams,
    dw: &SpectralVector,
    ws: &mut PaddedWorkspace,
    opts: &SolverOpts,
) -> Result<(SpectralVector, SpectralScalar, StepInfo)> {
    let (nu, k) = (params.nu(), params.k());
    let lagged = params.advection() == Advection::Lagged;
    let rhs = u_prev + dw;
    let (u, iters) = picard(u_prev.clone(), opts, |w| {
        let adv = if lagged { u_prev } else { w };
        let mut r = rhs.clone();
        r.axpy(-k, &b_tilde_apply(ws, adv, w)?);
        Ok(solve_solenoidal(&r, nu, k))
    })?;
    let adv = if lagged { u_prev } else { &u };
    let conv = b_tilde_apply(ws, adv, &u)?;
    let p = conv.divergence().inv_laplacian()?.scale(-1.0);
    check_growth(&u, u_prev, Some(dw), opts)?;
    let info = StepInfo {
        picard_iters: iters,
        div_residual: relative(u.divergence().l2(), u.h1()),
        penalty_residual: 0.0,
    };
    Ok((u, p, info))
}

/// Direct discretization of the linear stochastic Stokes problem (zero pressure).
pub fn stokes_direct_step(
    u_prev: &SpectralVector,
    params: &SchemeParams,
    dw: &SpectralVector,
) -> (SpectralVector, SpectralScalar, StepInfo) {
    let u = solve_solenoidal(&(u_prev + dw), params.nu(), params.k());
    let info = StepInfo {
        picard_iters: 0,
        div_residual: relative(u.divergence().l2(), u.h1()),
        penalty_residual: 0.0,
    };
    let p = SpectralScalar::zeros(*u.grid());
    (u, p, info)
}
