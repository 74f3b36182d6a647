use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("field has nonzero mean coefficient (|c0| = {mean:e}, relative {relative:e})")]
    NonzeroMean { mean: f64, relative: f64 },

    #[error("index {index} out of range 1..={max}")]
    OutOfRange { index: usize, max: usize },

    #[error(
        "Picard iteration failed after {iterations} iterations (last relative update {update:e})"
    )]
    PicardDiverged { iterations: usize, update: f64 },

    #[error("blow-up detected: growth factor {growth:e} exceeds guard {guard:e}")]
    BlowUp { growth: f64, guard: f64 },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("time grid mismatch: {0}")]
    TimeGridMismatch(String),

    #[error("noise coupling mismatch: {0}")]
    CouplingMismatch(String),

    #[error("need at least {needed} usable levels, got {got}")]
    InsufficientLevels { needed: usize, got: usize },

    #[error("missing diagnostics: {0}")]
    MissingDiagnostics(String),

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    /// Strips step context, returning the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerical method (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::PicardDiverged { .. } | Error::BlowUp { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
