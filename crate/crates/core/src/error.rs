use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite input to {0}")]
    NonFiniteInput(&'static str),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("parameters outside the soliton domain: {0}")]
    DomainViolation(String),
    #[error("box too small: soliton magnitude {0:.3e} at the boundary")]
    TruncationTooSmall(f64),
    #[error("quadrature did not converge (estimate {value}, error {error:.3e})")]
    NoConvergence { value: f64, error: f64 },
    #[error("no sign change of the threshold function for sigma = {0}")]
    NoSignChange(f64),
    #[error("threshold function has {count} sign changes for sigma = {sigma}")]
    RootNotUnique { sigma: f64, count: usize },
    #[error("Hessian not symmetric: d_c M = {dcm}, d_omega P = {dwp}")]
    SymmetryViolation { dcm: f64, dwp: f64 },
    #[error("Hessian is not degenerate (singular values {small:.3e}, {large:.3e})")]
    NotDegenerate { small: f64, large: f64 },
    #[error("kappa0 extractions disagree: {a} vs {b}")]
    Kappa0Mismatch { a: f64, b: f64 },
    #[error("eigensolver failure: {0}")]
    EigenFailure(String),
    #[error("blow-up detected at t = {0}")]
    BlowupDetected(f64),
    #[error("time step {dt} violates the guard {limit}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("state outside the modulation tube (distance {dist:.3e} > {radius:.3e})")]
    OutsideTube { dist: f64, radius: f64 },
    #[error("Newton iteration diverged (residual {0:.3e})")]
    NewtonDiverged(f64),
    #[error("cutoff radius {r} too large for half-length {l}")]
    CutoffTooLarge { r: f64, l: f64 },
    #[error("insufficient sampling: {0}")]
    InsufficientSampling(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
