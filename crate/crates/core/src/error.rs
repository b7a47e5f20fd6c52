use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("Riccati iteration did not converge after {iterations} iterations; (A, B) is not stabilizable under this discount")]
    NonStabilizable { iterations: usize },
    #[error("ill-posed cost: {0}")]
    IllPosedCost(String),
    #[error("closed loop is unstable (spectral radius {spectral_radius})")]
    Unstable { spectral_radius: f64 },
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),
    #[error("demonstration data is rank deficient: rank {rank} < required {required}")]
    UnderDetermined { rank: usize, required: usize },
    #[error("value function diverges: discounted closed-loop spectral radius {spectral_radius} >= 1")]
    DivergentValue { spectral_radius: f64 },
    #[error("trajectory diverged at step {step} (state norm {norm})")]
    Divergence { step: usize, norm: f64 },
    #[error("invalid comparison: {0}")]
    InvalidComparison(String),
    #[error("value-Lipschitz lemma inapplicable: gamma * l_f_pi = {product} >= 1")]
    LemmaInapplicable { product: f64 },
    #[error("certificate inapplicable: {0}")]
    Inapplicable(String),
    #[error("fixed-point iteration did not converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
