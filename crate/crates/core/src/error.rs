use thiserror::Error;

/// Errors surfaced by geometry construction and the computation engines.
#[derive(Debug, Error)]
pub enum DmvError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("arity error: expected {expected} bodies, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("representations are not jointly refinable: {0}; rasterize onto a grid first")]
    RequiresGrid(String),

    #[error("rotation is not a symmetry of the grid: {0}")]
    UnsupportedRotation(String),

    #[error("no exact construction for dimension {dim}: {what}")]
    UnsupportedDim { dim: usize, what: String },

    #[error("recovery budget exceeded: {cells}^{arity} = {required} weight evaluations > limit {limit}")]
    BudgetExceeded {
        cells: usize,
        arity: usize,
        required: u128,
        limit: u128,
    },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid descriptor field `{field}`: {message}")]
    Descriptor { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, DmvError>;

impl DmvError {
    pub fn descriptor(field: &str, message: impl Into<String>) -> Self {
        DmvError::Descriptor {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
