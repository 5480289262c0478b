use thiserror::Error;

/// Errors raised by the solver library.
///
/// Numeric payloads are reported as `f64` regardless of the scalar type the
/// solver ran with.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("strong convexity moduli must be positive (mu_x = {mu_x}, mu_y = {mu_y})")]
    NonPositiveModulus { mu_x: f64, mu_y: f64 },
    #[error("inconsistent smoothness constants: {0}")]
    InconsistentConstants(String),
    #[error("step sizes must be positive (eta_x = {eta_x}, eta_y = {eta_y})")]
    NonPositiveStep { eta_x: f64, eta_y: f64 },
    #[error("input `{name}` must be positive, got {value}")]
    NonPositiveInput { name: &'static str, value: f64 },
    #[error("a value oracle is required for `{0}`")]
    MissingValueOracle(&'static str),
    #[error("a known solution is required for `{0}`")]
    MissingKnownSolution(&'static str),
    #[error("auxiliary solve at outer iteration {outer_iteration} did not meet the acceptance criterion after {iterations} iterations")]
    InnerBudgetExhausted { outer_iteration: usize, iterations: usize },
    #[error("iteration budget of {iterations} exhausted")]
    BudgetExhausted { iterations: usize },
    #[error("divergence detected at outer iteration {iteration} (weighted distance {distance:e})")]
    Diverged { iteration: usize, distance: f64 },
    #[error("non-finite iterate at iteration {iteration}")]
    NonFiniteIterate { iteration: usize },
    #[error("regularization plan does not match the problem: {0}")]
    CaseMismatch(String),
    #[error("constraint residual {residual:e} did not shrink below {target:e}")]
    InfeasibleTarget { residual: f64, target: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
