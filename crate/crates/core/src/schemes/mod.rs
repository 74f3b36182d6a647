//! Time-stepping schemes and the trajectory runner.

mod params;
mod step;
mod trajectory;

pub use params::{Advection, SchemeParams, SolverOpts};
pub use step::{
    deterministic_penalty_step, direct_step, penalty_step, stokes_direct_step, stokes_penalty_step,
    PenaltyState, StepInfo,
};
pub use trajectory::{
    prepare_initial, resume_trajectory, run_decomposition, run_trajectory, DecompositionStep,
    NoiseInput, Observer, Sample, Sampler, Scheme, StepDiagnostics, StepView, TrajectoryRecord,
};
