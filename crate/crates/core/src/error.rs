use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate metric: pivot {pivot:.3e} against scale {scale:.3e}")]
    DegenerateMetric { pivot: f64, scale: f64 },
    #[error("s = {s} lies outside the family's admissible domain")]
    SingularS { s: f64 },
    #[error("phi - s phi' vanishes at s = {s}")]
    DegenerateDirection { s: f64 },
    #[error("Delta vanishes at s = {s}, b^2 = {bsq}")]
    SingularDelta { s: f64, bsq: f64 },
    #[error("fundamental tensor is singular")]
    DegenerateTensor,
    #[error("precondition violated: {condition} (residual {residual:.3e})")]
    PreconditionViolated { condition: String, residual: f64 },
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),
    #[error("unsupported pairing: {0}")]
    UnsupportedPairing(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("alpha(y) = {alpha:.3e} is below 1e-8 |y|")]
    SmallAlpha { alpha: f64 },
    #[error("configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
