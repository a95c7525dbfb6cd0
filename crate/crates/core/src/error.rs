use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension overflow while forming {what}")]
    DimensionOverflow { what: &'static str },

    #[error("dimension mismatch in {what}: {left} vs {right}")]
    DimensionMismatch { what: &'static str, left: usize, right: usize },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64, best_iterate: Vec<f64> },

    #[error("negative curvature {curvature:e} detected at iteration {iteration}; matrix is not positive definite")]
    NegativeCurvature { iteration: usize, curvature: f64, direction: Vec<f64> },

    #[error("matrix is singular to working precision: pivot {pivot:e} at row {row}")]
    Singular { row: usize, pivot: f64 },

    #[error("problem size {n} exceeds the limit {limit} for {what}")]
    TooLarge { what: &'static str, n: usize, limit: usize },

    #[error("degree-of-freedom budget exceeded: {required} dof required, budget is {budget}")]
    DofBudget { required: u128, budget: usize },

    #[error("quadrature budget exceeded: {required} sub-cells per element required, budget is {budget}")]
    QuadratureBudget { required: usize, budget: usize },

    #[error("matrix is not positive semi-definite: lambda_min estimate {lambda_min:e}")]
    Indefinite { lambda_min: f64 },

    #[error("coefficient violates ellipticity: {detail}")]
    Ellipticity { detail: String },

    #[error("unitary evolution drifted in norm by {drift:e}")]
    NormDrift { drift: f64 },

    #[error("recovery failed: extended component is {last:e}, expected 1")]
    Recovery { last: f64 },

    #[error("eigenvalue iteration did not converge; Ritz history {history:?}")]
    EigenNotConverged { history: Vec<(f64, f64)> },

    #[error("time step {step} failed: {source}")]
    Step { step: usize, source: Box<Error> },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("unknown configuration keys: {0:?}")]
    UnknownKeys(Vec<String>),

    #[error("missing required configuration keys: {0:?}")]
    MissingKeys(Vec<String>),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
