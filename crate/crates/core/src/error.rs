use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("size overflow: {what} would have {size} entries (limit {limit})")]
    Overflow { what: &'static str, size: u128, limit: u128 },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("solution norm exceeded the divergence threshold at t = {t}")]
    Diverged { t: f64 },

    #[error("step budget exhausted at t = {t}")]
    MaxStepsExceeded { t: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("system is not dissipative: log-norm of the linear part is {0} >= 0")]
    NonDissipative(f64),

    #[error("initial state has zero norm")]
    ZeroInitialState,

    #[error("constant term F0 is nonzero; the Carleman lift requires F0 = 0")]
    NonzeroConstantTerm,

    #[error("population component {index} is not positive ({value})")]
    NonPositivePopulation { index: usize, value: f64 },

    #[error("back-map pole: component {index} has 1 + g = {value}")]
    BackMapPole { index: usize, value: f64 },

    #[error("matrix `{what}` is not antisymmetric (max |M + M^T| = {deviation:e})")]
    NotAntisymmetric { what: &'static str, deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("[h, X] does not commute (max entry {0:e}); secular condition violated")]
    NonCommuting(f64),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("matrix is not normal (max |KK^+ - K^+K| = {0:e})")]
    NonNormal(f64),

    #[error("phase {theta} lies outside the Nyquist margin [-pi + {margin}, pi - {margin}]")]
    OutsideNyquistMargin { theta: f64, margin: f64 },

    #[error("no oscillatory modes: the oscillatory weight is zero")]
    EmptyOscillatorySet,

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("index {index} out of range 0..{len}")]
    OutOfRange { index: usize, len: usize },

    #[error("time grids differ: {0}")]
    TimeGridMismatch(String),

    #[error("Taylor propagator is unstable: ||T_l(Ah)|| = {0} > 1.5")]
    UnstablePropagator(f64),

    #[error("trajectory reached the pole b^+ x + 1 = 0 at t = {t}")]
    PoleEncountered { t: f64 },
}

impl Error {
    /// True for failures of the computation itself, as opposed to inputs
    /// that violate a precondition.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. }
                | Error::Diverged { .. }
                | Error::MaxStepsExceeded { .. }
                | Error::BackMapPole { .. }
                | Error::Singular(_)
                | Error::UnstablePropagator(_)
                | Error::PoleEncountered { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
