use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear solve did not reach tolerance after {iterations} refinement steps (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("boundary flux violates the compatibility condition: ∫ν dσ = {integral:e}")]
    Compatibility { integral: f64 },

    #[error("target mass {target:e} is unattainable: Λδ/ε²·|D|_ν = {capacity:e}")]
    Unattainable { target: f64, capacity: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("{0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
