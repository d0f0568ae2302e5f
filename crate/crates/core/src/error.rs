use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported symbol `{0}`")]
    UnsupportedSymbol(String),
    #[error("invalid Lebesgue exponent p = {0}")]
    InvalidExponent(f64),
    #[error("quadrature did not reach tolerance (achieved relative error {achieved:.3e})")]
    Accuracy { achieved: f64 },
    #[error("unsupported time-derivative order {0} (at most 2)")]
    UnsupportedOrder(usize),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("step size underflow at t = {0}")]
    Stiffness(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("solution diverged at t = {0}")]
    Divergence(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("fixed-point map is not contracting: {0}")]
    NoContraction(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("fit window error: {0}")]
    Window(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
    #[error("unsupported norm: {0}")]
    UnsupportedNorm(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("nothing to report")]
    EmptyResults,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
