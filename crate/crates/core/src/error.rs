use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("proximal map did not converge: {0}")]
    ProxFailure(String),
    #[error("not a subgradient: {0}")]
    NotASubgradient(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("zero time step at index {0}")]
    ZeroStep(usize),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("generator returned a non-finite value at t={t}, y={y}, z={z}")]
    NonFiniteGenerator { t: f64, y: f64, z: f64 },
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("penalization solve failed: {0}")]
    PenalizationSolveFailure(String),
    #[error("conditional expectation backend mismatch: {0}")]
    BackendMismatch(String),
    #[error("potential is infinite along the test process at step {step}")]
    InfinitePotential { step: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("expression error: {0}")]
    Expression(String),
}

pub type Result<T> = std::result::Result<T, Error>;
