use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("not paramagnetic: (d-1)*tanh^2(K0) = {value:.6} >= 1 for d = {d}, K0 = {k0}")]
    NotParamagnetic { d: usize, k0: f64, value: f64 },

    #[error("quadrature did not converge: estimated error {estimate:e} exceeds tolerance {tol:e}")]
    Quadrature { estimate: f64, tol: f64 },

    #[error("fixed point for Gamma oscillates without converging (last iterates {prev} and {last})")]
    GammaOscillation { prev: f64, last: f64 },

    #[error("equations of state did not converge after {iterations} iterations (final residual {residual:e})")]
    EosDivergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("inner L1 problem failed for replicate {trial}: {reason}")]
    InnerSolver { trial: usize, reason: String },

    #[error("Newton solve for the proximal output failed at s-state {state}, z = {z}")]
    ProxNewton { state: usize, z: f64 },

    #[error("solver hit the iteration cap ({iterations}) with KKT residual {kkt:e}")]
    IterationCap { iterations: usize, kkt: f64 },

    #[error("enumeration over 2^{bits} states is too large (limit 2^{limit})")]
    EnumerationTooLarge { bits: usize, limit: usize },

    #[error("graph construction failed: {0}")]
    Graph(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
