//! Accelerated sliding for composite saddle point problems
//! `min_x max_y p(x) + R(x, y) - q(y)`.
//!
//! The outer loop calls `grad p` and `grad q` once per step and hands the
//! coupling term to an auxiliary solver, so the two oracle families are
//! counted (and paid for) separately. Everything is generic over the scalar
//! type; the aliases at the bottom fix it to `f64`.

// NaN-rejecting checks are written as negated comparisons on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bilinear;
pub mod error;
pub mod inner;
pub mod linalg;
pub mod outer;
pub mod problem;
pub mod regularization;
pub mod scalar;

pub use error::{Error, Result};
pub use inner::{
    compute_rescaling, gamma_target, AuxiliaryProblem, AuxiliarySolver, Extragradient, InnerConfig, InnerSolution,
    Rescaling,
};
pub use linalg::{DenseMatrix, LinearMap};
pub use outer::{
    check_inner_criterion, compute_potential, required_outer_iterations, solve, solve_sliding, tune_parameters, Branch,
    ConvergenceReport, IterationRecord, OuterState, Psi0Source, SolveConfig, SolverTuning, Termination,
};
pub use problem::{
    bregman, validate_spec, weighted_distance_sq, wrap_counting, CompositeSaddle, CountedOracles, CountingProblem,
    OracleCounters, PointPair, SmoothnessSpec,
};
pub use scalar::Scalar;

pub type Point = PointPair<f64>;
pub type Spec = SmoothnessSpec<f64>;
pub type Tuning = SolverTuning<f64>;
pub type Config = SolveConfig<f64>;
pub type Report = ConvergenceReport<f64>;
pub type Matrix = DenseMatrix<f64>;
pub type QuadraticSaddle = problem::QuadraticSaddle<f64>;
