use thiserror::Error;

/// Errors surfaced by the certification and simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation contract (dimension mismatch, bad index, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A sampling domain has zero volume or inverted bounds.
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    /// A covering or enumeration would exceed the configured budget.
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    /// Certificate has no boundary-flagged point to refine around.
    #[error("certificate has no boundary points: {0}")]
    NoBoundaryPoints(String),

    /// Local refinement shrank below the configured radius floor.
    #[error("refinement radius collapsed below r_min = {r_min} (last radius {radius})")]
    RadiusCollapsed { radius: f64, r_min: f64 },

    /// Local refinement exhausted its iteration budget without a clean pass.
    #[error("refinement exhausted {iterations} iterations without a violation-free pass")]
    IterationsExhausted { iterations: usize },

    /// A certificate was queried with a policy it was not built for.
    #[error("policy mismatch: certificate bound to '{expected}', queried with '{actual}'")]
    PolicyMismatch { expected: String, actual: String },

    /// All controller rollouts produced non-finite cost.
    #[error("controller failure: {0}")]
    ControllerFailure(String),

    /// Configuration file could not be read or parsed.
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
