use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("unsupported derivative order {0} (expected 1, 2 or 3)")]
    DerivOrder(usize),
    #[error("weight window {window} exceeds half the domain length {half}")]
    Window { window: f64, half: f64 },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("numeric blow-up at t = {t}: max|u| = {max}")]
    BlowUp { t: f64, max: f64 },
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("matrix exponential overflow for step {0}; split the interval")]
    ExpOverflow(f64),
    #[error("system is numerically singular (estimated norm of inverse {0:e})")]
    NearSingular(f64),
    #[error("fit did not converge after {iters} iterations (|G| = {residual:e})")]
    FitDiverged { iters: usize, residual: f64 },
    #[error("fitted speed left the admissible range: c = {0}")]
    BadSpeed(f64),
    #[error("modulation matrix is singular (condition number {0:e})")]
    SingularModulation(f64),
    #[error("decay tail is not monotone; discretization looks under-resolved")]
    NonMonotoneTail,
    #[error("log-log fit residual {0:e} is too large")]
    PoorFit(f64),
    #[error("orthogonality violated: |<v2, zeta>| = {0:e}")]
    Orthogonality(f64),
    #[error("virial ledger violated at t = {t}: excess {excess:e}")]
    Virial { t: f64, excess: f64 },
    #[error("tail region x >= {0} lies outside the domain")]
    TailOutside(f64),
    #[error("{0}")]
    Unsupported(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("config: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code: 2 for configuration and i/o problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) | Error::Param(_) | Error::Grid(_) | Error::Window { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
