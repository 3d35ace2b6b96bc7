use thiserror::Error;

/// Errors raised by the geometry pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("metric is not positive definite at {point:?} (min eigenvalue {min_eigenvalue:e})")]
    NonSpd { point: Vec<f64>, min_eigenvalue: f64 },
    #[error("chart mismatch: {0}")]
    ChartMismatch(String),
    #[error("unsupported derivative order k = {0} (at most 2)")]
    UnsupportedK(usize),
    #[error("point {point:?} lies in the singular margin of axis {axis}")]
    SingularRegion { point: Vec<f64>, axis: usize },
    #[error("field has no analytic derivatives; use finite differences")]
    MissingAnalyticJet,
    #[error("cutoff epsilon {0} outside (0, 1/4)")]
    BadEpsilon(f64),
    #[error("cutoff constraint violated: {0}")]
    ConstraintViolation(String),
    #[error("stretch must be positive, got {0}")]
    NonpositiveTau(f64),
    #[error("path parameter {0} outside [0, 1]")]
    OutOfRangeU(f64),
    #[error("path is not psc: min scalar curvature {min_kappa:e} at u = {u}, x = {point:?}")]
    NotPscPath { min_kappa: f64, u: f64, point: Vec<f64> },
    #[error("no psc stretch found up to tau = {max_tau:e}")]
    BracketFailure { max_tau: f64 },
    #[error("negativity witness needs a positive S', got {0}")]
    NonpositiveSprime(f64),
    #[error("warping function not positive at t = {t} (f = {f})")]
    NonpositiveF { t: f64, f: f64 },
    #[error("t = {t} is inside the excluded center band (t < {t_min})")]
    DegenerateCenter { t: f64, t_min: f64 },
    #[error("torpedo blend is not psc: min kappa {min_kappa:e} at t = {t}; try a smaller smoothing width")]
    BadSmoothing { min_kappa: f64, t: f64 },
    #[error("bad torpedo parameters: {0}")]
    BadTorpedoParameters(String),
    #[error("path start does not match the boundary metric (residual {residual:e})")]
    BoundaryMismatch { residual: f64 },
    #[error("glued cylinder is not psc at stretch {stretch}: min kappa {min_kappa:e}")]
    NotPscCylinder { stretch: f64, min_kappa: f64 },
    #[error("collar flow misses its target: phi(0) = {reached}, expected {expected}")]
    OdeTolerance { reached: f64, expected: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
