use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("release rate must be nonnegative, got {0}")]
    NegativeControl(f64),

    #[error("operation requires a finite environmental capacity")]
    InfiniteCapacity,

    #[error("operation requires the K = infinity model, got K = {0}")]
    FiniteCapacity(f64),

    #[error("basic offspring number R0 = {0} <= 1: extinction is the only equilibrium")]
    NoPersistenceEquilibrium(f64),

    #[error("theta below stabilization threshold: R(theta) = {r_theta} >= 1 (theta* = {threshold})")]
    ThetaBelowThreshold { r_theta: f64, threshold: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite (min eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("matrix is ill-conditioned (condition estimate {0:e})")]
    IllConditioned(f64),

    #[error("eigensolver did not converge after {0} sweeps")]
    EigenNoConvergence(usize),

    #[error("parameter box has {count} free parameters, above the cap of {cap}")]
    TooManyVertices { count: usize, cap: usize },

    #[error("synthesis failed after max iterations (best worst eigenvalue {best_worst_eig:e})")]
    SynthesisFailed { best_worst_eig: f64 },

    #[error("non-finite state at t = {t}; last valid time {last_valid}")]
    Diverged { t: f64, last_valid: f64 },

    #[error("invalid simulation options: {0}")]
    InvalidOptions(String),

    #[error("empty series")]
    EmptySeries,

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
