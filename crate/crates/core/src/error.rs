use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate system: {0}")]
    DegenerateSystem(String),

    #[error("order {order} is not an integer multiple of the base order {base}")]
    IncommensurateOrder { order: String, base: String },

    #[error("filter fit failed: residual {residual:.3e} above threshold {threshold:.3e}")]
    FitFailure { residual: f64, threshold: f64 },

    #[error("filter state poisoned by a non-finite input; reset required")]
    PoisonedState,

    #[error("order constraint violated: {0}")]
    OrderConstraint(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("numerically unreliable result: {0}")]
    Indeterminate(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
