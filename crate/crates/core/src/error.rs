use thiserror::Error;

/// Failures raised by the numerical laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaneError {
    #[error("loop does not close: residual {residual:e} exceeds {tolerance:e}")]
    NonClosedLoop { residual: f64, tolerance: f64 },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("finite-difference stencil at {point:?} leaves the chart")]
    BoundaryPoint { point: Vec<f64> },
    #[error("grid has {samples} samples, at least {required} required")]
    GridTooCoarse { samples: usize, required: usize },
    #[error("curve leaves the chart domain at t = {t}")]
    ChartExit { t: f64 },
    #[error("orthogonality residual {residual:e} before polar correction; refine the step count (was {steps})")]
    StepTooLarge { residual: f64, steps: usize },
    #[error("subalgebra basis is degenerate (Gram condition number {condition:e})")]
    DegenerateBasis { condition: f64 },
    #[error("loop lengths are not vanishing monotonically (index {index}: {previous} -> {current})")]
    LengthNotVanishing { index: usize, previous: f64, current: f64 },
    #[error("search budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("operation not supported by model `{model}`: {what}")]
    Unsupported { model: String, what: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("malformed bundle file: {0}")]
    BundleFile(String),
}

pub type Result<T> = std::result::Result<T, WaneError>;
