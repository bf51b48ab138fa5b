use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("at least one factor is required")]
    EmptyFactors,
    #[error("vectors must be nonempty")]
    EmptyVector,
    #[error("data length {found} does not match shape product {expected}")]
    DataLength { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("N must be a power of two (got {0})")]
    NotPowerOfTwo(usize),
    #[error("rank mismatch: {0}")]
    RankMismatch(String),
    #[error("{0} is not on the probability simplex")]
    NotSimplex(String),
    #[error("invalid probability mass function: {0}")]
    InvalidPmf(String),
    #[error("invalid axes: {0}")]
    InvalidAxes(String),
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("invalid node address: {0}")]
    InvalidAddress(String),
    #[error("enumeration budget exceeded: {what} needs {needed} entries, cap is {cap}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        cap: usize,
    },
    #[error("density integrates to {mass}, expected 1 within 1e-6")]
    NotNormalized { mass: f64 },
    #[error("invalid density parameters: {0}")]
    InvalidDensity(String),
    #[error("truncation leaves tail mass {mass:e} (must be < 1e-9)")]
    TruncationMass { mass: f64 },
    #[error("quadrature did not converge (estimated error {error:e})")]
    QuadratureDiverged { error: f64 },
    #[error("relu requires a nonnegative support (lower bound is {lo})")]
    ReluSupport { lo: f64 },
    #[error("map is not strictly monotone on the support")]
    NonMonotone,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
}
