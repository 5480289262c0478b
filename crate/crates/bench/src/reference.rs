//! Direct KKT solves used as the ground truth for every reported distance.

use nalgebra::{DMatrix, DVector};
use saddle_core::Point;

use crate::error::{BenchError, Result};
use crate::instance::InstanceData;

/// Acceptance threshold on `||M z - rhs|| / (1 + ||rhs||)`.
pub const KKT_RESIDUAL_TOL: f64 = 1e-10;

/// `[[P + mu_x I, B], [B^T, -(Q + mu_y I)]] [x; y] = [-a; c]`, the
/// first-order conditions of `p(x) + R(x, y) - q(y)`.
pub fn kkt_system(d: &InstanceData) -> (DMatrix<f64>, DVector<f64>) {
    let (dx, dy) = d.dims();
    let n = dx + dy;
    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), (dx, dx))
        .copy_from(&(&d.p + DMatrix::identity(dx, dx) * d.mu_x));
    m.view_mut((0, dx), (dx, dy)).copy_from(&d.b);
    m.view_mut((dx, 0), (dy, dx)).copy_from(&d.b.transpose());
    m.view_mut((dx, dx), (dy, dy))
        .copy_from(&(-(&d.q + DMatrix::identity(dy, dy) * d.mu_y)));
    let mut rhs = DVector::zeros(n);
    rhs.rows_mut(0, dx).copy_from(&(-&d.a));
    rhs.rows_mut(dx, dy).copy_from(&d.c);
    (m, rhs)
}

/// Relative KKT residual of a candidate saddle.
pub fn kkt_residual(d: &InstanceData, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let (m, rhs) = kkt_system(d);
    let z = DVector::from_iterator(x.len() + y.len(), x.iter().chain(y.iter()).cloned());
    (m * z - &rhs).norm() / (1.0 + rhs.norm())
}

/// Dense LU solve of the KKT system.
pub fn reference_solution(d: &InstanceData) -> Result<Point> {
    let (dx, _) = d.dims();
    let (m, rhs) = kkt_system(d);
    let z = m.clone().lu().solve(&rhs).ok_or(BenchError::SingularSystem {
        residual: f64::INFINITY,
    })?;
    let residual = (&m * &z - &rhs).norm() / (1.0 + rhs.norm());
    if residual.is_nan() || residual > KKT_RESIDUAL_TOL {
        return Err(BenchError::SingularSystem { residual });
    }
    Ok(Point::new(
        z.rows(0, dx).iter().cloned().collect(),
        z.rows(dx, z.len() - dx).iter().cloned().collect(),
    ))
}
