use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spin length: twice_j = {0} (must be >= 1)")]
    InvalidSpin(i64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("field h must be nonzero to define a bath temperature")]
    ZeroField,

    #[error("cross-sector coupling {value:e} at ({row}, {col}) exceeds tolerance")]
    SectorLeak { row: usize, col: usize, value: f64 },

    #[error("steady state is not unique: {count} eigenvalues of the M=0 block within {tol:e} of zero")]
    NonUniqueSteadyState { count: usize, tol: f64 },

    #[error("eigensolver failed on sector M={sector}")]
    Eigensolver { sector: i64 },

    #[error("singular resolvent at omega = {omega}")]
    SingularResolvent { omega: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("frequency grid invalid: {0}")]
    InvalidGrid(String),

    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),

    #[error("no dominant peak: max {max:e} is not above 3x median {median:e}")]
    NoPeak { max: f64, median: f64 },

    #[error("resolvent evaluated at its pole")]
    AtPole,
}

pub type Result<T> = std::result::Result<T, Error>;
