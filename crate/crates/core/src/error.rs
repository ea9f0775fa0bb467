use thiserror::Error;

/// Failures raised by the geometric and algebraic operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("metric is singular at the point (|det g| = {det:e})")]
    SingularMetric { det: f64 },
    #[error("point at coordinate radius {radius} lies outside the chart domain (radius {domain_radius})")]
    OutOfDomain { radius: f64, domain_radius: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("path segment of length {length} exceeds the transport step bound {bound}")]
    StepTooLarge { length: f64, bound: f64 },
    #[error("geodesic left the chart domain at t = {t}")]
    LeftDomain { t: f64 },
    #[error("geodesic is not lightlike (g(v, v) = {norm:e})")]
    NotLightlike { norm: f64 },
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("ill-conditioned spectrum: {0}")]
    IllConditioned(String),
    #[error("operator has {real_clusters} real eigenvalue cluster(s); at least two are needed")]
    NoRealSplit { real_clusters: usize },
    #[error("operator is not a projector (|L^2 - L| = {residual:e})")]
    NotProjector { residual: f64 },
    #[error("basis is degenerate (Gram determinant {gram_det:e})")]
    DegenerateBasis { gram_det: f64 },
    #[error("no critical point of mu found (smallest |grad mu| = {best_gradient:e})")]
    NoExtremalPoint { best_gradient: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
