use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("component index {index} out of range (k = {k})")]
    ComponentOutOfRange { index: usize, k: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("bisection bracket failure on [{lo:e}, {hi:e}]: {detail}")]
    BracketFailure { lo: f64, hi: f64, detail: String },

    #[error("quadrature did not converge: error estimate {estimate:e} exceeds {tolerance:e}")]
    QuadratureFailure { estimate: f64, tolerance: f64 },

    #[error("support reaches the boundary margin at step {step} (t = {t})")]
    SupportOverflow { step: u64, t: f64 },

    #[error("profile support radius {radius} does not fit inside half extent {half_extent}")]
    ProfileOverflow { radius: f64, half_extent: f64 },

    #[error("non-finite value at step {step}, component {component}, cell {cell}")]
    NonFinite {
        step: u64,
        component: usize,
        cell: usize,
    },

    #[error("max_steps = {max_steps} exhausted at t = {t} before t_end = {t_end}")]
    MaxStepsExhausted { max_steps: u64, t: f64, t_end: f64 },

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("mass mismatch: profile mass {profile} vs state total {state}")]
    MassMismatch { profile: f64, state: f64 },

    #[error("zero total mass")]
    ZeroMass,

    #[error("insufficient snapshots: {0}")]
    InsufficientSnapshots(String),

    #[error("mismatched trajectories: {0}")]
    MismatchedTrajectories(String),

    #[error("hypothesis violated: R = {radius} must exceed T^(1/p) = {bound}")]
    HarnackHypothesis { radius: f64, bound: f64 },

    #[error("snapshot format, line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
