use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("position is within {min_radius:e} LU of a primary (r1 = {r1:e}, r2 = {r2:e})")]
    SingularPosition { r1: f64, r2: f64, min_radius: f64 },

    #[error("integrator could not meet tolerance at t = {t} (step size {h:e})")]
    StepFailure { t: f64, h: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("window [{start}, {start}+{count}] exceeds trajectory of {len} samples")]
    WindowOutOfRange { start: usize, count: usize, len: usize },

    #[error("need at least {needed} columns, found {found}")]
    InsufficientColumns { needed: usize, found: usize },

    #[error("window too short: {cols} Hankel columns for {rows} rows at l = {delays}")]
    WindowTooShort { delays: usize, rows: usize, cols: usize },

    #[error("Hankel matrix still has full row rank at l_max = {l_max} (rank {rank})")]
    DelayLimitExceeded { l_max: usize, rank: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("all singular values fall below the truncation threshold")]
    DegenerateSvd,

    #[error("linear algebra failure: {0}")]
    Decomposition(String),

    #[error("every eigenvalue is real; no oscillatory mode to derive a period from")]
    NoOscillatoryMode,

    #[error("signal too short: {0} samples")]
    SignalTooShort(usize),

    #[error("grids differ: {0}")]
    GridMismatch(String),

    #[error("truth window is identically zero")]
    ZeroTruth,

    #[error("coordinate normal to the {0} plane never leaves the crossing tolerance")]
    DegeneratePlane(&'static str),

    #[error("need at least {needed} crossing events, found {found}")]
    InsufficientEvents { needed: usize, found: usize },

    #[error("empty signal")]
    EmptySignal,

    #[error("periodic-orbit correction did not converge after {iterations} iterations (residual {residual:e})")]
    CorrectionFailed { iterations: usize, residual: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Json(_) => 2,
            Error::Io(_) => 3,
            Error::SingularPosition { .. }
            | Error::StepFailure { .. }
            | Error::CorrectionFailed { .. } => 4,
            Error::DelayLimitExceeded { .. } | Error::WindowTooShort { .. } => 5,
            Error::DegenerateSvd | Error::Decomposition(_) | Error::NoOscillatoryMode => 6,
            _ => 1,
        }
    }
}
