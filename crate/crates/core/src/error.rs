use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {0} is outside the supported range 1..=6")]
    Dimension(usize),
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("grid spacing h={h} must satisfy 0 < h <= epsilon={epsilon}")]
    Spacing { h: f64, epsilon: f64 },
    #[error("point {0:?} lies outside the grid coverage")]
    OutsideCoverage(Vec<f64>),
    #[error("payoff queried at interior point {x:?} with t={t} > 0")]
    InteriorPayoffQuery { x: Vec<f64>, t: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("eigenvalue index j={j} out of range 1..={n}")]
    IndexOutOfRange { j: usize, n: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("fixed-point iteration did not converge after {sweeps} sweeps (residual {residual:e})")]
    NotConverged { sweeps: usize, residual: f64 },
    #[error("stencil at node {0} reaches an exterior node")]
    StencilOutsideStrip(usize),
    #[error("time {t} is outside the covered range [0, {max}]")]
    TimeOutOfRange { t: f64, max: f64 },
    #[error("insufficient sample: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    #[error("section of the domain through the given point is empty")]
    EmptySection,
    #[error("point {0:?} is not a convex combination of the boundary samples")]
    NotRepresentable(Vec<f64>),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
