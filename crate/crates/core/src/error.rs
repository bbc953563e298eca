use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {field} samples but grid has {grid} cells")]
    GridMismatch { field: usize, grid: usize },

    #[error("zero mass")]
    ZeroMass,

    #[error("negative density {value:e} at node {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular linear system (pivot {pivot:e} at row {row})")]
    Singular { row: usize, pivot: f64 },

    #[error("blow-up at t = {t}: {reason}")]
    Blowup { t: f64, reason: String },

    #[error("CFL violation: dt * max|G| = {courant:e} exceeds h = {h:e}")]
    Cfl { courant: f64, h: f64 },

    #[error("Picard iteration did not converge in {iterations} iterations (last residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("unsupported norm order p = {0}")]
    UnsupportedNorm(u32),

    #[error("decay fit needs at least {needed} samples in window, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("decay fit needs positive values, found {value:e} at t = {t}")]
    NonPositiveSample { t: f64, value: f64 },
}

impl Error {
    /// True for errors caused by bad inputs rather than by the numerics.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_)
                | Error::InvalidGrid(_)
                | Error::GridMismatch { .. }
                | Error::InvalidInput(_)
                | Error::UnsupportedNorm(_)
                | Error::ZeroMass
                | Error::NegativeDensity { .. }
        )
    }
}
