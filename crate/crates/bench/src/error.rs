use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("matrix file {path}: {reason}")]
    MatrixFormat { path: PathBuf, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("infeasible constants: {0}")]
    InfeasibleConstants(String),
    #[error("declared {name} = {declared} but the data gives {estimated}")]
    ConstantMismatch {
        name: String,
        declared: f64,
        estimated: f64,
    },
    #[error("KKT system is singular (relative residual {residual:e})")]
    SingularSystem { residual: f64 },
    #[error("budget exhausted after {iterations} iterations")]
    BudgetExhausted { iterations: usize },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Solver(#[from] saddle_core::Error),
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> BenchError {
        let path = path.into();
        move |source| BenchError::Io { path, source }
    }

    /// Budget exhaustion anywhere in the stack (maps to exit code 2).
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            BenchError::BudgetExhausted { .. }
                | BenchError::Solver(saddle_core::Error::BudgetExhausted { .. })
                | BenchError::Solver(saddle_core::Error::InnerBudgetExhausted { .. })
        )
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
