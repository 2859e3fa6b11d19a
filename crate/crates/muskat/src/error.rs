use thiserror::Error;

/// Errors surfaced by the contour-dynamics kernels and the run machinery.
///
/// Geometric failures (self-intersection, singular kernels, conformal
/// clearance violations) carry the offending location so a halted run can
/// report where the interface degenerated.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {n} is invalid: {reason}")]
    InvalidGrid { n: usize, reason: &'static str },

    #[error("derivative order {order} exceeds accuracy guard n/4 = {max} for n = {n}")]
    DerivativeOrder { order: usize, n: usize, max: usize },

    #[error("curve self-intersects on the grid: points at alpha = {alpha} and beta = {beta} coincide")]
    SelfIntersection { alpha: f64, beta: f64 },

    #[error("singular kernel: chord between alpha = {alpha} and beta = {beta} is {chord:.3e} (< {limit:.0e})")]
    SingularKernel {
        alpha: f64,
        beta: f64,
        chord: f64,
        limit: f64,
    },

    #[error("strip evaluation at xi = {xi} amplifies the spectral tail past the guard (tail {tail:.3e} > {factor:.0e} x band {band:.3e})")]
    StripExceeded {
        xi: f64,
        tail: f64,
        band: f64,
        factor: f64,
    },

    #[error("too few usable spectral modes ({found}, need {needed}) to fit a decay rate")]
    InsufficientSpectrum { found: usize, needed: usize },

    #[error("vorticity solve did not converge in {iterations} iterations (residual {residual:.3e}, tol {tol:.3e})")]
    SolveDiverged {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("dense interface operator is numerically singular (pivot {pivot:.3e})")]
    IllConditioned { pivot: f64 },

    #[error("cost guard: {what} requires n <= {max}, got {n}")]
    CostGuard {
        what: &'static str,
        n: usize,
        max: usize,
    },

    #[error("state blew up at t = {t} (step {step}): {reason}")]
    BlowUp { t: f64, step: usize, reason: String },

    #[error("conformal map pole too close: |cos(w/2)| = {value:.3e} at alpha = {alpha}")]
    PoleProximity { alpha: f64, value: f64 },

    #[error("curve sample at alpha = {alpha} lies on the branch cut (angular distance {dist:.3e})")]
    CutProximity { alpha: f64, dist: f64 },

    #[error("clearance violation: transformed curve within {dist:.3e} of singular point q{index} at alpha = {alpha}")]
    ClearanceViolation { index: usize, alpha: f64, dist: f64 },

    #[error("exponential fit rejected: relative residual {residual:.3e} exceeds {limit}")]
    FitFailure { residual: f64, limit: f64 },

    #[error("invalid scenario parameter: {0}")]
    Scenario(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
