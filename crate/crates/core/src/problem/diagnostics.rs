use super::{check_len, PointPair};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Bregman divergence `f(x) - f(x_ref) - <grad f(x_ref), x - x_ref>`.
///
/// `value` returning `None` means no value oracle is available.
pub fn bregman<T: Scalar>(
    value: impl Fn(&[T]) -> Option<T>,
    grad: impl Fn(&[T]) -> Vec<T>,
    x: &[T],
    x_ref: &[T],
) -> Result<T> {
    check_len(x, x_ref.len())?;
    let fx = value(x).ok_or(Error::MissingValueOracle("bregman"))?;
    let fr = value(x_ref).ok_or(Error::MissingValueOracle("bregman"))?;
    let g = grad(x_ref);
    check_len(&g, x_ref.len())?;
    let d = linalg::sub(x, x_ref);
    Ok(fx - fr - linalg::dot(&g, &d))
}

/// `(1/eta_x)||a.x - b.x||^2 + (1/eta_y)||a.y - b.y||^2`.
pub fn weighted_distance_sq<T: Scalar>(a: &PointPair<T>, b: &PointPair<T>, eta_x: T, eta_y: T) -> Result<T> {
    if !(eta_x > T::zero() && eta_y > T::zero()) {
        return Err(Error::NonPositiveStep {
            eta_x: eta_x.as_f64(),
            eta_y: eta_y.as_f64(),
        });
    }
    check_len(&a.x, b.x.len())?;
    check_len(&a.y, b.y.len())?;
    Ok(linalg::dist_sq(&a.x, &b.x) / eta_x + linalg::dist_sq(&a.y, &b.y) / eta_y)
}

/// Plain `||a.x - b.x||^2 + ||a.y - b.y||^2`.
pub fn dist_sq_pair<T: Scalar>(a: &PointPair<T>, b: &PointPair<T>) -> Result<T> {
    check_len(&a.x, b.x.len())?;
    check_len(&a.y, b.y.len())?;
    Ok(linalg::dist_sq(&a.x, &b.x) + linalg::dist_sq(&a.y, &b.y))
}
