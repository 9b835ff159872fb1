use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point ({x1}, {x2}) lies outside the closed domain")]
    OutsideDomain { x1: f64, x2: f64 },

    #[error("arc coordinate {0} must lie strictly between 0 and 1")]
    ArcOutOfRange(f64),

    #[error("singular configuration: image distance {distance:e} is below the guard")]
    Singular { distance: f64 },

    #[error(
        "shell sum not converged at r_max = {r_max}: last change {change:e} exceeds tol {tol:e}"
    )]
    ShellNonConvergence { r_max: u32, change: f64, tol: f64 },

    #[error("oracle points are {separation} apart, below the separation threshold {threshold}")]
    Separation { separation: f64, threshold: f64 },

    #[error(
        "quadrature did not reach tolerance {tol:e} (estimate {estimate:e}, {regions} regions)"
    )]
    Quadrature {
        tol: f64,
        estimate: f64,
        regions: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("particle escaped the half-domain at ({x1}, {x2})")]
    Escape { x1: f64, x2: f64 },

    #[error("time step {dt} exceeds the stability bound {dt_max}")]
    StepTooLarge { dt: f64, dt_max: f64 },

    #[error("history gap {gap} exceeds the recorded stability bound {limit}")]
    SparseHistory { gap: f64, limit: f64 },

    #[error("time {t} is outside the recorded history [0, {t_end}]")]
    TimeOutOfRange { t: f64, t_end: f64 },

    #[error("exponential fit needs at least 4 points, got {0}")]
    TooFewPoints(usize),

    #[error("exponential fit needs positive values, got {value} at t = {t}")]
    NonPositive { t: f64, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
