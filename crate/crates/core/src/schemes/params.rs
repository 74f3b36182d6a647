use crate::error::{Error, Result};

/// How the advecting field in `B̃(·, ũ)` is taken inside a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Advection {
    /// `B̃(ũ^ℓ, ũ^ℓ)`, solved by Picard iteration.
    Implicit,
    /// `B̃(ũ^{ℓ-1}, ũ^ℓ)`, linear in the unknown.
    Lagged,
}

/// Time-discretization parameters shared by all schemes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeParams {
    nu: f64,
    k: f64,
    steps: usize,
    epsilon: f64,
    eta: f64,
    alpha: f64,
    couple_eps_to_k: bool,
    advection: Advection,
}

impl SchemeParams {
    /// Penalty parameter tied to the step, `ε = k^η`.
    pub fn coupled(nu: f64, k: f64, steps: usize, eta: f64, alpha: f64) -> Result<Self> {
        let p = SchemeParams {
            nu,
            k,
            steps,
            epsilon: k.powf(eta),
            eta,
            alpha,
            couple_eps_to_k: true,
            advection: Advection::Implicit,
        };
        p.validate()?;
        Ok(p)
    }

    /// Independent penalty parameter; `eta` is still validated and recorded.
    pub fn uncoupled(
        nu: f64,
        k: f64,
        steps: usize,
        epsilon: f64,
        eta: f64,
        alpha: f64,
    ) -> Result<Self> {
        let p = SchemeParams {
            nu,
            k,
            steps,
            epsilon,
            eta,
            alpha,
            couple_eps_to_k: false,
            advection: Advection::Implicit,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::param(
                "scheme.nu",
                format!("must be > 0, got {}", self.nu),
            ));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::param(
                "scheme.k",
                format!("must be > 0, got {}", self.k),
            ));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::param(
                "scheme.epsilon",
                format!("must be > 0, got {}", self.epsilon),
            ));
        }
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return Err(Error::param(
                "scheme.eta",
                format!("must lie in (0, 1/2), got {}", self.eta),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 1.0) {
            return Err(Error::param(
                "scheme.alpha",
                format!("must be > 1, got {}", self.alpha),
            ));
        }
        Ok(())
    }

    /// Same parameters on a different time grid; a coupled `ε` follows the new step.
    pub fn with_level(&self, k: f64, steps: usize) -> Result<Self> {
        let mut p = *self;
        p.k = k;
        p.steps = steps;
        if p.couple_eps_to_k {
            p.epsilon = k.powf(p.eta);
        }
        p.validate()?;
        Ok(p)
    }

    pub fn with_advection(mut self, advection: Advection) -> Self {
        self.advection = advection;
        self
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_coupled(&self) -> bool {
        self.couple_eps_to_k
    }

    pub fn advection(&self) -> Advection {
        self.advection
    }

    /// `T = k M`.
    pub fn horizon(&self) -> f64 {
        self.k * self.steps as f64
    }
}

/// Nonlinear solver controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOpts {
    /// Relative `L²` size of the Picard update at which iteration stops.
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Largest accepted `‖u^ℓ‖ / (‖u^{ℓ-1}‖ + ‖ΔW‖)` before a step is declared blown up.
    pub divergence_guard: f64,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts {
            picard_tol: 1e-11,
            picard_max_iter: 100,
            divergence_guard: 1e3,
        }
    }
}

impl SolverOpts {
    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol > 0.0 && self.picard_tol.is_finite()) {
            return Err(Error::param("scheme.picard_tol", "must be > 0"));
        }
        if self.picard_max_iter < 1 {
            return Err(Error::param("scheme.picard_max_iter", "must be >= 1"));
        }
        if self.divergence_guard.is_nan() || self.divergence_guard <= 1.0 {
            return Err(Error::param("scheme.divergence_guard", "must be > 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_is_exact() {
        let p = SchemeParams::coupled(1.0, 0.01, 50, 0.4, 2.0).unwrap();
        assert_eq!(p.epsilon(), 0.01f64.powf(0.4));
        let q = p.with_level(0.005, 100).unwrap();
        assert_eq!(q.epsilon(), 0.005f64.powf(0.4));
        let u = SchemeParams::uncoupled(1.0, 0.01, 50, 0.1, 0.4, 2.0).unwrap();
        assert_eq!(u.with_level(0.005, 100).unwrap().epsilon(), 0.1);
    }

    #[test]
    fn range_checks() {
        assert!(SchemeParams::coupled(1.0, 0.01, 50, 0.5, 2.0).is_err());
        assert!(SchemeParams::coupled(1.0, 0.01, 50, 0.0, 2.0).is_err());
        assert!(SchemeParams::coupled(1.0, 0.01, 50, 0.4, 1.0).is_err());
        assert!(SchemeParams::coupled(0.0, 0.01, 50, 0.4, 2.0).is_err());
        assert!(SchemeParams::uncoupled(1.0, 0.01, 50, 0.0, 0.4, 2.0).is_err());
        let mut o = SolverOpts::default();
        assert!(o.validate().is_ok());
        o.picard_max_iter = 0;
        assert!(o.validate().is_err());
    }
}
