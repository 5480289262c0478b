//! The composite saddle problem `min_x max_y p(x) + R(x, y) - q(y)`: oracle
//! traits, smoothness metadata, counting wrappers and distance diagnostics.

mod counting;
mod diagnostics;
mod functions;

pub use counting::{wrap_counting, CountedOracles, CountingProblem, OracleCounters};
pub use diagnostics::{bregman, dist_sq_pair, weighted_distance_sq};
pub use functions::{
    BilinearCoupling, CompositeProblem, FnCoupling, FnFunction, IsotropicQuadratic, Quadratic, QuadraticSaddle,
};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// A primal/dual point. Used for iterates, extrapolation points, averaged
/// points and solutions alike.
#[derive(Clone, Debug, PartialEq)]
pub struct PointPair<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Scalar> PointPair<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Self {
        Self { x, y }
    }

    pub fn zeros(d_x: usize, d_y: usize) -> Self {
        Self {
            x: vec![T::zero(); d_x],
            y: vec![T::zero(); d_y],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.x.len(), self.y.len())
    }

    pub fn is_finite(&self) -> bool {
        linalg::all_finite(&self.x) && linalg::all_finite(&self.y)
    }

    pub fn check_dims(&self, d_x: usize, d_y: usize) -> Result<()> {
        check_len(&self.x, d_x)?;
        check_len(&self.y, d_y)
    }
}

pub(crate) fn check_len<T>(v: &[T], expected: usize) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got: v.len() })
    }
}

/// Smoothness and strong convexity constants of the three parts.
///
/// `l_p`, `l_q` and `l_r` are Lipschitz constants of the gradients; `mu_x`
/// and `mu_y` are the strong convexity / concavity moduli of the coupling
/// term. Construction does not validate; use [`validate_spec`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothnessSpec<T> {
    pub l_p: T,
    pub l_q: T,
    pub l_r: T,
    pub mu_x: T,
    pub mu_y: T,
}

impl<T: Scalar> SmoothnessSpec<T> {
    pub fn new(l_p: T, l_q: T, l_r: T, mu_x: T, mu_y: T) -> Self {
        Self {
            l_p,
            l_q,
            l_r,
            mu_x,
            mu_y,
        }
    }
}

/// Checks the constants are usable by the solver.
pub fn validate_spec<T: Scalar>(spec: &SmoothnessSpec<T>) -> Result<()> {
    let all = [spec.l_p, spec.l_q, spec.l_r, spec.mu_x, spec.mu_y];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::InconsistentConstants("all constants must be finite".into()));
    }
    if spec.mu_x <= T::zero() || spec.mu_y <= T::zero() {
        return Err(Error::NonPositiveModulus {
            mu_x: spec.mu_x.as_f64(),
            mu_y: spec.mu_y.as_f64(),
        });
    }
    if spec.l_p < T::zero() || spec.l_q < T::zero() {
        return Err(Error::InconsistentConstants(format!(
            "L_p = {}, L_q = {} must be non-negative",
            spec.l_p, spec.l_q
        )));
    }
    if spec.l_r < spec.mu_x.max(spec.mu_y) {
        return Err(Error::InconsistentConstants(format!(
            "L_R = {} is below max(mu_x, mu_y) = {}",
            spec.l_r,
            spec.mu_x.max(spec.mu_y)
        )));
    }
    Ok(())
}

/// A differentiable function of one block.
pub trait SmoothFunction<T: Scalar> {
    fn dim(&self) -> usize;
    fn gradient(&self, x: &[T]) -> Vec<T>;
    /// Function value; only diagnostics need it.
    fn value(&self, _x: &[T]) -> Option<T> {
        None
    }
}

/// The coupling term `R(x, y)`.
pub trait Coupling<T: Scalar> {
    fn dims(&self) -> (usize, usize);
    /// Returns `(grad_x R, grad_y R)`.
    fn gradient(&self, x: &[T], y: &[T]) -> (Vec<T>, Vec<T>);
    fn value(&self, _x: &[T], _y: &[T]) -> Option<T> {
        None
    }
}

/// First-order oracles of `p(x) + R(x, y) - q(y)`.
///
/// Oracles must be deterministic. Value oracles are optional and only used
/// for diagnostics (potential, Bregman divergences).
pub trait CompositeSaddle<T: Scalar> {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn grad_p(&self, x: &[T]) -> Vec<T>;
    fn grad_q(&self, y: &[T]) -> Vec<T>;
    /// Returns `(grad_x R, grad_y R)` with a single oracle call.
    fn grad_r(&self, x: &[T], y: &[T]) -> (Vec<T>, Vec<T>);
    fn value_p(&self, _x: &[T]) -> Option<T> {
        None
    }
    fn value_q(&self, _y: &[T]) -> Option<T> {
        None
    }
    fn value_r(&self, _x: &[T], _y: &[T]) -> Option<T> {
        None
    }
}

impl<T: Scalar, P: CompositeSaddle<T> + ?Sized> CompositeSaddle<T> for &P {
    fn dim_x(&self) -> usize {
        (**self).dim_x()
    }
    fn dim_y(&self) -> usize {
        (**self).dim_y()
    }
    fn grad_p(&self, x: &[T]) -> Vec<T> {
        (**self).grad_p(x)
    }
    fn grad_q(&self, y: &[T]) -> Vec<T> {
        (**self).grad_q(y)
    }
    fn grad_r(&self, x: &[T], y: &[T]) -> (Vec<T>, Vec<T>) {
        (**self).grad_r(x, y)
    }
    fn value_p(&self, x: &[T]) -> Option<T> {
        (**self).value_p(x)
    }
    fn value_q(&self, y: &[T]) -> Option<T> {
        (**self).value_q(y)
    }
    fn value_r(&self, x: &[T], y: &[T]) -> Option<T> {
        (**self).value_r(x, y)
    }
}

/// Saddle operator `F(z) = (grad p + grad_x R, grad q - grad_y R)`; its zero
/// is the saddle point. Makes one call of each oracle.
pub fn saddle_operator<T: Scalar, P: CompositeSaddle<T> + ?Sized>(problem: &P, z: &PointPair<T>) -> PointPair<T> {
    let gp = problem.grad_p(&z.x);
    let gq = problem.grad_q(&z.y);
    let (rx, ry) = problem.grad_r(&z.x, &z.y);
    PointPair::new(linalg::add(&gp, &rx), linalg::sub(&gq, &ry))
}
