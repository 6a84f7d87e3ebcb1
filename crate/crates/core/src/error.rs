use thiserror::Error;

/// Errors raised by the library.
///
/// Variants split into two families: invalid input (a caller can fix it by
/// changing parameters) and numerical failure (the computation was attempted
/// but could not certify its result). The CLI maps the first family to exit
/// code 2 and the second to exit code 1.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("q out of range: q[{index}] = {value} is not in (0, 1)")]
    QOutOfRange { index: usize, value: f64 },

    #[error("theta must be positive: theta[{index}] = {value}")]
    ThetaNotPositive { index: usize, value: f64 },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("window overlap: windows {first} and {second} intersect")]
    WindowOverlap { first: usize, second: usize },

    #[error("outpost {index} at t = {t} is not admissible: {reason}")]
    OutpostPlacement {
        index: usize,
        t: f64,
        reason: String,
    },

    #[error("window touches component: {0}")]
    WindowTouchesComponent(String),

    #[error("infeasible construction: {0}")]
    Infeasible(String),

    #[error("radius {r} outside smooth window [{lo}, {hi}]")]
    OutsideSmoothWindow { r: f64, lo: f64, hi: f64 },

    #[error("validator check `{check}` failed: {detail}")]
    ValidationFailed { check: String, detail: String },

    #[error("table size {requested} exceeds entry budget {budget}")]
    BudgetExceeded { requested: usize, budget: usize },

    #[error("enumeration budget exceeded ({states} states > {budget})")]
    EnumerationBudget { states: usize, budget: usize },

    #[error("overflow guard: s[{index}] = {value} exceeds 700")]
    Overflow { index: usize, value: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("ambiguous classification: {0}")]
    AmbiguousClassification(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("no peak found for tau = {tau}")]
    NoPeak { tau: f64 },

    #[error("sampler grid failure at index {j}: {detail}")]
    SamplerGrid { j: usize, detail: String },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by the caller's input rather than numerics.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::QOutOfRange { .. }
                | Error::ThetaNotPositive { .. }
                | Error::LengthMismatch { .. }
                | Error::ArityMismatch { .. }
                | Error::WindowOverlap { .. }
                | Error::OutpostPlacement { .. }
                | Error::WindowTouchesComponent(_)
                | Error::Infeasible(_)
                | Error::OutsideSmoothWindow { .. }
                | Error::ValidationFailed { .. }
                | Error::Overflow { .. }
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
