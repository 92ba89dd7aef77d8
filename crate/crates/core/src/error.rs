use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value at {0}")]
    NonFiniteValue(String),
    #[error("curves are defined on different grids")]
    GridMismatch,
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("empty sample")]
    EmptySample,
    #[error("invalid B-spline specification: {0}")]
    InvalidSpline(String),
    #[error("ill-conditioned least-squares system (condition {0:e})")]
    IllConditioned(f64),
    #[error("invalid number of basis functions k = {0}")]
    InvalidK(usize),
    #[error("invalid spline order {0}")]
    InvalidOrder(usize),
    #[error("sample interval must be [0, 1], got [{a}, {b}]")]
    WrongInterval { a: f64, b: f64 },
    #[error("degenerate covariance: eigenvalue {index} is {value:e} (leading {leading:e})")]
    DegenerateCovariance { index: usize, value: f64, leading: f64 },
    #[error("need at least two curves per sample (m = {m}, n = {n})")]
    TooFewCurves { m: usize, n: usize },
    #[error("pooled covariance is singular or too ill-conditioned (condition {0:e})")]
    SingularCovariance(f64),
    #[error("degrees of freedom must be >= 1")]
    InvalidDF,
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
    #[error("too few replicates: {got} (need at least {need})")]
    TooFewReplicates { got: usize, need: usize },
    #[error("{failed} of {total} replicates failed (more than 1%)")]
    TooManyFailedReplicates { failed: usize, total: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{fraction:.3} of the spectral energy lies above the Nyquist frequency {nyquist} rad/s")]
    NyquistViolation { fraction: f64, nyquist: f64 },
    #[error("record too short: {len} samples, need more than {need}")]
    RecordTooShort { len: usize, need: usize },
    #[error("fewer than two downcrossings in the record")]
    NoWaves,
    #[error("wave has no upcrossing of the mean level")]
    NoUpcrossing,
    #[error("record has zero variance")]
    ZeroVariance,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
