//! Path-wise membership in the high-probability sample sets that the
//! convergence-in-probability argument conditions on.

use super::errors::ErrorTerms;
use super::stats::quantile;
use crate::error::{Error, Result};
use crate::schemes::{Sample, StepDiagnostics};
use crate::spectral::{Field, Norm, SpectralVector};

/// The three path quantities compared against `(κ₁, κ₂, κ₃)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleSetQuantities {
    /// `sup_t ‖∇u(t)‖² + k Σ_ℓ ‖∇u(t_ℓ)‖²` of the reference path.
    pub solution_bound: f64,
    /// Error functional of the first auxiliary scheme against its reference.
    pub z_error: f64,
    /// `max_ℓ ‖u(t_ℓ) - u(t_{ℓ-1})‖²_{L⁴} / k^{2η}` over adjacent coarse times.
    pub increment_ratio: f64,
}

impl SampleSetQuantities {
    /// `reference_diag` covers every reference step; `coarse_samples` are the
    /// reference fields at the coarse times `t_1..t_M`.
    pub fn from_reference(
        u0: &SpectralVector,
        reference_diag: &[StepDiagnostics],
        coarse_samples: &[Sample],
        z_terms: Option<&ErrorTerms>,
        k: f64,
        eta: f64,
    ) -> Result<Self> {
        if reference_diag.is_empty() || coarse_samples.is_empty() {
            return Err(Error::MissingDiagnostics(
                "reference trajectory is empty".into(),
            ));
        }
        let z =
            z_terms.ok_or_else(|| Error::MissingDiagnostics("auxiliary Stokes errors".into()))?;
        let sup = reference_diag
            .iter()
            .map(|d| d.enstrophy)
            .fold(u0.sobolev_sq(1.0), f64::max);
        let sum: f64 = coarse_samples.iter().map(|s| s.u.sobolev_sq(1.0)).sum();
        let mut prev = u0;
        let mut max_inc = 0.0f64;
        for s in coarse_samples {
            let d = (&s.u - prev).norm(Norm::L4)?;
            max_inc = max_inc.max(d * d);
            prev = &s.u;
        }
        Ok(SampleSetQuantities {
            solution_bound: sup + k * sum,
            z_error: z.em(),
            increment_ratio: max_inc / k.powf(2.0 * eta),
        })
    }

    fn as_array(&self) -> [f64; 3] {
        [self.solution_bound, self.z_error, self.increment_ratio]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
}

impl Thresholds {
    /// `κ₁ = ln k^{-μ/2}`, `κ₂ = k^{μ+r}`, `κ₃ = k^{-η}`.
    pub fn asymptotic_schedule(k: f64, mu: f64, r: f64, eta: f64) -> Self {
        Thresholds {
            kappa1: -0.5 * mu * k.ln(),
            kappa2: k.powf(mu + r),
            kappa3: k.powf(-eta),
        }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.kappa1, self.kappa2, self.kappa3]
    }
}

/// How thresholds are chosen at each level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdRule {
    Fixed(Thresholds),
    /// Empirical quantile of each quantity over the paths of the level.
    Quantile(f64),
    AsymptoticSchedule {
        mu: f64,
        r: f64,
    },
}

impl ThresholdRule {
    pub fn resolve(
        &self,
        quantities: &[Option<SampleSetQuantities>],
        k: f64,
        eta: f64,
    ) -> Result<Thresholds> {
        match *self {
            ThresholdRule::Fixed(t) => Ok(t),
            ThresholdRule::AsymptoticSchedule { mu, r } => {
                Ok(Thresholds::asymptotic_schedule(k, mu, r, eta))
            }
            ThresholdRule::Quantile(q) => {
                let present: Vec<[f64; 3]> =
                    quantities.iter().flatten().map(|x| x.as_array()).collect();
                if present.is_empty() {
                    return Err(Error::MissingDiagnostics(
                        "no path produced sample-set data".into(),
                    ));
                }
                let col = |i: usize| quantile(&present.iter().map(|a| a[i]).collect::<Vec<_>>(), q);
                Ok(Thresholds {
                    kappa1: col(0),
                    kappa2: col(1),
                    kappa3: col(2),
                })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSetStats {
    pub thresholds: Thresholds,
    /// Per path: membership in `Ω_{κ₁}`, `Ω_{κ₂}`, `Ω_{κ₃}`. Failed paths are
    /// members of none.
    pub membership: Vec<[bool; 3]>,
    /// Empirical `P(Ω ∖ Ω_{κᵢ})`.
    pub complement: [f64; 3],
}

impl SampleSetStats {
    /// Fraction of paths inside all three sets.
    pub fn intersection(&self) -> f64 {
        let n = self.membership.len();
        self.membership
            .iter()
            .filter(|m| m.iter().all(|&b| b))
            .count() as f64
            / n as f64
    }
}

/// Evaluates membership of every path. The increment condition is only
/// checked on adjacent coarse time pairs.
pub fn sample_set_membership(
    quantities: &[Option<SampleSetQuantities>],
    thresholds: Thresholds,
) -> Result<SampleSetStats> {
    if quantities.is_empty() {
        return Err(Error::MissingDiagnostics("no paths".into()));
    }
    let kap = thresholds.as_array();
    let membership: Vec<[bool; 3]> = quantities
        .iter()
        .map(|q| match q {
            Some(q) => {
                let v = q.as_array();
                [v[0] <= kap[0], v[1] <= kap[1], v[2] <= kap[2]]
            }
            None => [false; 3],
        })
        .collect();
    let n = membership.len() as f64;
    let mut complement = [0.0; 3];
    for (i, c) in complement.iter_mut().enumerate() {
        *c = membership.iter().filter(|m| !m[i]).count() as f64 / n;
    }
    Ok(SampleSetStats {
        thresholds,
        membership,
        complement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Grid, SpectralScalar};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn q(a: f64, b: f64, c: f64) -> Option<SampleSetQuantities> {
        Some(SampleSetQuantities {
            solution_bound: a,
            z_error: b,
            increment_ratio: c,
        })
    }

    #[test]
    fn limits() {
        let qs = [q(1.0, 2.0, 3.0), q(0.5, 0.1, 7.0)];
        let inf = Thresholds {
            kappa1: f64::INFINITY,
            kappa2: f64::INFINITY,
            kappa3: f64::INFINITY,
        };
        let s = sample_set_membership(&qs, inf).unwrap();
        assert!(s.membership.iter().all(|m| m == &[true; 3]));
        assert_eq!(s.complement, [0.0; 3]);
        let zero = Thresholds {
            kappa1: 0.0,
            kappa2: 0.0,
            kappa3: 0.0,
        };
        let s = sample_set_membership(&qs, zero).unwrap();
        assert!(s.membership.iter().all(|m| m == &[false; 3]));
        assert_eq!(s.complement, [1.0; 3]);
        assert!(sample_set_membership(&[], zero).is_err());
    }

    #[test]
    fn single_path_hand_evaluation() {
        // L = 2π, u = (c cos y·2, 0) built from mode (0, 1) with amplitude a:
        // u_x = 2a cos y, ‖∇u‖² = 8π² a², ‖u‖⁴_{L⁴} = 16a⁴ ∫cos⁴ = 16a⁴ · 3π²/2.
        let g = Grid::periodic_2pi(16).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        let field = |a: f64| {
            let mut x = SpectralScalar::zeros(g);
            x.set_mode(0, 1, Complex64::new(a, 0.0)).unwrap();
            SpectralVector::new(x, SpectralScalar::zeros(g)).unwrap()
        };
        let k = 0.25;
        let eta = 0.25;
        let samples: Vec<Sample> = [1.0, 0.5]
            .iter()
            .enumerate()
            .map(|(l, &a)| Sample {
                step: l + 1,
                t: (l + 1) as f64 * k,
                u: field(a),
                p: SpectralScalar::zeros(g),
                u_tilde: field(a),
            })
            .collect();
        let diag = |e: f64| StepDiagnostics {
            step: 0,
            t: 0.0,
            energy: 0.0,
            enstrophy: e,
            div_residual: 0.0,
            penalty_residual: 0.0,
            picard_iters: 0,
            tilde_grad_sq: 0.0,
            pressure_sq: 0.0,
        };
        let z = ErrorTerms {
            max_term: 0.1,
            grad_term: 0.2,
            pressure_term: 0.3,
        };
        let u0 = field(0.0);
        let got = SampleSetQuantities::from_reference(
            &u0,
            &[diag(1.0), diag(100.0), diag(3.0)],
            &samples,
            Some(&z),
            k,
            eta,
        )
        .unwrap();
        let l4sq = |a: f64| (16.0 * a.powi(4) * 1.5 * pi2).sqrt();
        assert!((got.solution_bound - (100.0 + k * 8.0 * pi2 * 1.25)).abs() < 1e-12);
        assert!((got.z_error - 0.6).abs() < 1e-15);
        let want = l4sq(1.0).max(l4sq(0.5)) / k.sqrt();
        assert!((got.increment_ratio - want).abs() < 1e-10 * want);

        let t = Thresholds {
            kappa1: 200.0,
            kappa2: 0.5,
            kappa3: want * 1.01,
        };
        let s = sample_set_membership(&[Some(got)], t).unwrap();
        assert_eq!(s.membership, vec![[true, false, true]]);
        assert_eq!(s.complement, [0.0, 1.0, 0.0]);
        assert!(SampleSetQuantities::from_reference(&u0, &[], &samples, Some(&z), k, eta).is_err());
        assert!(
            SampleSetQuantities::from_reference(&u0, &[diag(1.0)], &samples, None, k, eta).is_err()
        );
    }

    #[test]
    fn schedule_and_quantile_rules() {
        let t = Thresholds::asymptotic_schedule(0.01, 0.1, 0.2, 0.4);
        assert!((t.kappa1 - 0.05 * 100f64.ln()).abs() < 1e-15);
        assert!((t.kappa2 - 0.01f64.powf(0.3)).abs() < 1e-15);
        assert!((t.kappa3 - 0.01f64.powf(-0.4)).abs() < 1e-12);
        let qs = [q(1.0, 10.0, 5.0), None, q(3.0, 30.0, 1.0)];
        let t = ThresholdRule::Quantile(0.5).resolve(&qs, 0.1, 0.4).unwrap();
        assert_eq!((t.kappa1, t.kappa2, t.kappa3), (2.0, 20.0, 3.0));
        let s = sample_set_membership(&qs, t).unwrap();
        assert_eq!(s.membership[1], [false; 3]);
    }

    proptest! {
        #[test]
        fn complements_shrink_as_thresholds_grow(
            vals in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0), 1..30),
            base in (0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0),
            bump in 0.0f64..3.0,
        ) {
            let qs: Vec<_> = vals.iter().map(|&(a, b, c)| q(a, b, c)).collect();
            let lo = Thresholds { kappa1: base.0, kappa2: base.1, kappa3: base.2 };
            let hi = Thresholds { kappa1: base.0 + bump, kappa2: base.1 + bump, kappa3: base.2 + bump };
            let a = sample_set_membership(&qs, lo).unwrap();
            let b = sample_set_membership(&qs, hi).unwrap();
            for i in 0..3 {
                prop_assert!(b.complement[i] <= a.complement[i]);
                prop_assert!((0.0..=1.0).contains(&a.complement[i]));
            }
        }
    }
}
