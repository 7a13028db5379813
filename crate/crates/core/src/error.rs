//! Error type shared by every module of the crate.
//!
//! Each variant maps to a stable, machine-readable code (see [`Error::code`])
//! which the command-line front end forwards in its error envelope.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at position {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("parameter t{index} out of range (declared {declared})")]
    ParamOutOfRange { index: usize, declared: usize },
    #[error("singular evaluation: {0}")]
    EvalSingular(String),
    #[error("x = {x} lies within {guard:e} of pole {pole}")]
    NearPole { x: String, pole: usize, guard: f64 },
    #[error("poles {0} and {1} collide")]
    PoleCollision(usize, usize),
    #[error("gauge transform is singular: {0}")]
    SingularGauge(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("residue spectrum is resonant: eigenvalues {0} and {1} differ by the integer {2}")]
    ResonantSpectrum(String, String, i64),
    #[error("pole {pole} has order {order} at this parameter point (simple pole required)")]
    NotSimple { pole: usize, order: usize },
    #[error("integration failed: {0}")]
    IntegrationFailure(String),
    #[error("step size underflow at path parameter {0}")]
    StepUnderflow(f64),
    #[error("non-finite value encountered during integration")]
    NonFinite,
    #[error("missing monodromy record: {0}")]
    MissingRecord(String),
    #[error("could not draw enough admissible samples ({0} attempts)")]
    SamplingExhausted(usize),
    #[error("system is not Fuchsian: {0}")]
    NotFuchsian(String),
    #[error("reference monodromy matrix for loop {0} is singular")]
    SingularReference(usize),
    #[error("moving singularities collide: min separation {0:e}")]
    Collision(f64),
    #[error("pole {pole} left its reference disk (moved {moved:e}, disk radius {radius:e})")]
    PoleMigration { pole: usize, moved: f64, radius: f64 },
    #[error("invalid loop: {0}")]
    InvalidLoop(String),
    #[error("missing deformation direction: {0}")]
    MissingDirection(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable upper-case code used in machine-readable output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "SYNTAX_ERROR",
            Error::UnknownIdentifier(_) => "UNKNOWN_IDENTIFIER",
            Error::ParamOutOfRange { .. } => "PARAM_OUT_OF_RANGE",
            Error::EvalSingular(_) => "EVAL_SINGULAR",
            Error::NearPole { .. } => "NEAR_POLE",
            Error::PoleCollision(..) => "POLE_COLLISION",
            Error::SingularGauge(_) => "SINGULAR_GAUGE",
            Error::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            Error::ResonantSpectrum(..) => "RESONANT_SPECTRUM",
            Error::NotSimple { .. } => "NOT_SIMPLE",
            Error::IntegrationFailure(_) => "INTEGRATION_FAILURE",
            Error::StepUnderflow(_) => "STEP_UNDERFLOW",
            Error::NonFinite => "NONFINITE",
            Error::MissingRecord(_) => "MISSING_RECORD",
            Error::SamplingExhausted(_) => "SAMPLING_EXHAUSTED",
            Error::NotFuchsian(_) => "NOT_FUCHSIAN",
            Error::SingularReference(_) => "SINGULAR_REFERENCE",
            Error::Collision(_) => "COLLISION",
            Error::PoleMigration { .. } => "POLE_MIGRATION",
            Error::InvalidLoop(_) => "INVALID_LOOP",
            Error::MissingDirection(_) => "MISSING_DIRECTION",
            Error::InvalidInput(_) => "INVALID_INPUT",
        }
    }
}
