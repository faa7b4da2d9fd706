use thiserror::Error;

/// Errors raised by the estimator and its solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("window index {index} out of range for degree {degree}")]
    WindowIndex { index: usize, degree: usize },

    #[error("point {t} lies outside the unit interval")]
    OutsideUnit { t: f64 },

    #[error("observation {index} = {x} lies outside [{a}, {b}]")]
    OutsideDomain {
        index: usize,
        x: f64,
        a: f64,
        b: f64,
    },

    #[error("invalid interval [{a}, {b}]: need finite a < b")]
    InvalidInterval { a: f64, b: f64 },

    #[error("sample set is empty")]
    EmptySample,

    #[error("observation {index} is not finite")]
    NonFinite { index: usize },

    #[error("infeasible: every weighted window vanishes at sample {sample}")]
    Infeasible { sample: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("inner solver stopped after {updates} updates with residual {residual:e}")]
    InnerCapExceeded {
        updates: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("inner solution violates the sphere constraint: |u|^2 = {norm_sq}, r = {r}")]
    SphereViolation { norm_sq: f64, r: f64 },

    #[error("outer iteration stopped after {iterations} steps with inner product {inner_product} (r = {r})")]
    OuterCapExceeded {
        iterations: usize,
        inner_product: f64,
        r: f64,
        trace: Box<crate::outer::FitTrace>,
    },

    #[error("outer step {step} did not complete: {source}")]
    StepFailed {
        step: usize,
        source: Box<Error>,
        trace: Box<crate::outer::FitTrace>,
    },

    #[error("density vanishes at sample {index}")]
    ZeroDensity { index: usize },

    #[error("quadrature did not converge: estimate {estimate}, error {error_estimate:e}")]
    Quadrature { estimate: f64, error_estimate: f64 },

    #[error("instance too large for oracle: {0}")]
    OracleTooLarge(String),

    #[error("oracle did not converge: {0}")]
    OracleNonConvergence(String),

    #[error("malformed model document: {0}")]
    Malformed(String),

    #[error("model constraint violated: {0}")]
    Constraint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
