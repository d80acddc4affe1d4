use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Every variant carries a stable machine-readable code (see [`Error::code`])
/// so the command-line front end can report failures uniformly.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension limit exceeded: {entries} entries requested, cap is {cap}")]
    DimensionLimit { entries: u128, cap: u128 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("iteration did not converge after {iterations} steps (last estimate {last})")]
    Convergence { iterations: usize, last: f64 },

    #[error("placement error: {0}")]
    Placement(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical rank error: {0}")]
    NumericalRank(String),

    #[error("symmetry error: {0}")]
    Symmetry(String),

    #[error("index out of bounds: {0}")]
    Bounds(String),

    #[error("inadmissible parameters: {0}")]
    Rounding(String),

    #[error("construction failed: {message} (best mu {best_mu})")]
    Construction { message: String, best_mu: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionLimit { .. } => "dimension_limit",
            Error::Shape(_) => "shape",
            Error::Convergence { .. } => "convergence",
            Error::Placement(_) => "placement",
            Error::Domain(_) => "domain",
            Error::Size(_) => "size",
            Error::Precondition(_) => "precondition",
            Error::NumericalRank(_) => "numerical_rank",
            Error::Symmetry(_) => "symmetry",
            Error::Bounds(_) => "bounds",
            Error::Rounding(_) => "rounding",
            Error::Construction { .. } => "construction",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
