//! Error functionals, Monte Carlo studies and their statistics.

mod errors;
mod sample_sets;
mod stability;
mod stats;
mod study;
mod validation;

pub use errors::{
    check_coupling, compute_error_functionals, ErrorReport, ErrorTerms, LevelInfo, PathErrors,
    SampledRun,
};
pub use sample_sets::{
    sample_set_membership, SampleSetQuantities, SampleSetStats, ThresholdRule, Thresholds,
};
pub use stability::{relative_spread, run_stability_sweep, StabilityLevel, StabilityTerms};
pub use stats::{
    binomial_half_width, estimate_exceedance, fit_rate, median, quantile, Exceedance, RateFit, Z95,
};
pub use study::{
    check_telescoping, run_mc_study, InitialCondition, NoiseSpec, StudyConfig, StudyResult,
};
pub use validation::{noise_statistics, taylor_green_convergence, NoiseCheck, TaylorGreenLevel};

#[cfg(test)]
mod tests;
