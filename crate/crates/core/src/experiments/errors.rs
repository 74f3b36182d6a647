//! Velocity/pressure error functionals against a reference path.

use crate::error::{Error, Result};
use crate::noise::LadderMeta;
use crate::schemes::Sample;
use crate::spectral::Field;

/// The three sums making up the error functional of one path.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorTerms {
    /// `max_m ‖e^m‖²`
    pub max_term: f64,
    /// `ν k Σ ‖∇e^ℓ‖²`
    pub grad_term: f64,
    /// `k Σ ‖q^ℓ‖²`
    pub pressure_term: f64,
}

impl ErrorTerms {
    /// Sum of the three terms.
    pub fn em(&self) -> f64 {
        self.max_term + self.grad_term + self.pressure_term
    }

    /// Same as [`em`](Self::em) with square roots on the two sums.
    pub fn tem(&self) -> f64 {
        self.max_term + self.grad_term.sqrt() + self.pressure_term.sqrt()
    }

    /// Velocity-only part `max_term + grad_term`.
    pub fn velocity(&self) -> f64 {
        self.max_term + self.grad_term
    }

    pub fn is_finite(&self) -> bool {
        self.em().is_finite()
    }
}

/// Fields sampled at `t_1 .. t_M` together with the ladder that drove them.
#[derive(Clone, Copy, Debug)]
pub struct SampledRun<'a> {
    pub samples: &'a [Sample],
    pub ladder: Option<&'a LadderMeta>,
}

/// Checks that two runs were driven by the same sampled noise path.
pub fn check_coupling(a: Option<&LadderMeta>, b: Option<&LadderMeta>) -> Result<()> {
    match (a, b) {
        (None, None) => Ok(()),
        (Some(x), Some(y)) => {
            let same = x.base_seed == y.base_seed
                && x.path_index == y.path_index
                && x.fine_steps == y.fine_steps
                && x.fine_step_len == y.fine_step_len
                && x.cutoff == y.cutoff
                && x.gamma == y.gamma;
            if same {
                Ok(())
            } else {
                Err(Error::CouplingMismatch(format!(
                    "path ({}, {}) vs ({}, {})",
                    x.base_seed, x.path_index, y.base_seed, y.path_index
                )))
            }
        }
        _ => Err(Error::CouplingMismatch(
            "one run is noise-driven and the other is not".into(),
        )),
    }
}

/// Error terms of `coarse` against `reference` sampled on the same grid
/// `t_ℓ = ℓ k`, `ℓ = 1..M`.
pub fn compute_error_functionals(
    coarse: SampledRun<'_>,
    reference: SampledRun<'_>,
    nu: f64,
    k: f64,
) -> Result<ErrorTerms> {
    check_coupling(coarse.ladder, reference.ladder)?;
    if coarse.samples.len() != reference.samples.len() {
        return Err(Error::TimeGridMismatch(format!(
            "{} coarse samples vs {} reference samples",
            coarse.samples.len(),
            reference.samples.len()
        )));
    }
    let mut terms = ErrorTerms::default();
    for (l, (c, r)) in coarse.samples.iter().zip(reference.samples).enumerate() {
        let t = (l + 1) as f64 * k;
        let tol = 1e-9 * k;
        if (c.t - t).abs() > tol || (r.t - t).abs() > tol {
            return Err(Error::TimeGridMismatch(format!(
                "sample {} at t = {} (coarse) and {} (reference), expected {t}",
                l + 1,
                c.t,
                r.t
            )));
        }
        c.u.grid().check_same(r.u.grid())?;
        let e = &r.u - &c.u;
        let q = &r.p - &c.p;
        terms.max_term = terms.max_term.max(e.sobolev_sq(0.0));
        terms.grad_term += e.sobolev_sq(1.0);
        terms.pressure_term += q.sobolev_sq(0.0);
    }
    terms.grad_term *= nu * k;
    terms.pressure_term *= k;
    Ok(terms)
}

/// Time-level metadata of one refinement level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelInfo {
    /// Position in the level list, coarsest first.
    pub level: usize,
    pub steps: usize,
    pub k: f64,
    pub eps: f64,
}

/// Outcome of one path at one level.
#[derive(Clone, Debug, PartialEq)]
pub struct PathErrors {
    pub path: u64,
    pub terms: Option<ErrorTerms>,
    /// Set when the scheme or the reference failed numerically.
    pub blew_up: bool,
    pub failure: Option<String>,
}

impl PathErrors {
    pub fn ok(path: u64, terms: ErrorTerms) -> Self {
        PathErrors {
            path,
            terms: Some(terms),
            blew_up: false,
            failure: None,
        }
    }

    pub fn failed(path: u64, reason: impl std::fmt::Display) -> Self {
        PathErrors {
            path,
            terms: None,
            blew_up: true,
            failure: Some(reason.to_string()),
        }
    }

    pub fn em(&self) -> Option<f64> {
        self.terms.map(|t| t.em())
    }

    pub fn tem(&self) -> Option<f64> {
        self.terms.map(|t| t.tem())
    }
}

/// Per-path error terms at one level.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub level: LevelInfo,
    pub paths: Vec<PathErrors>,
}

impl ErrorReport {
    pub fn finite(&self) -> impl Iterator<Item = &ErrorTerms> {
        self.paths.iter().filter_map(|p| p.terms.as_ref())
    }

    pub fn blown_up(&self) -> usize {
        self.paths.iter().filter(|p| p.blew_up).count()
    }

    /// Mean of `f` over the paths that did not fail; NaN if none survived.
    pub fn mean_of(&self, f: impl Fn(&ErrorTerms) -> f64) -> f64 {
        let (sum, n) = self
            .finite()
            .fold((0.0, 0usize), |(s, n), t| (s + f(t), n + 1));
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }

    pub fn mean_em(&self) -> f64 {
        self.mean_of(ErrorTerms::em)
    }

    pub fn mean_tem(&self) -> f64 {
        self.mean_of(ErrorTerms::tem)
    }
}
