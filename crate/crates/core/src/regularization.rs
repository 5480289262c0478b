//! Quadratic regularization of (strongly) convex-concave problems and the
//! matching accuracy targets.
//!
//! Regularizers are folded into the coupling term: `R + c_x ||x||^2 - c_y ||y||^2`
//! adds `2 c_x`, `2 c_y` to the moduli.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::outer::{solve_sliding, tune_parameters, ConvergenceReport, Psi0Source, SolveConfig};
use crate::problem::{validate_spec, CompositeSaddle, CountedOracles, OracleCounters, PointPair, SmoothnessSpec};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularizationCase {
    /// Strongly convex in `x`, concave in `y`: only `y` is regularized.
    Scc,
    /// Convex-concave: both blocks regularized.
    Cc,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularizationPlan<T> {
    pub case: RegularizationCase,
    pub d_x: Option<T>,
    pub d_y: T,
    pub eps: T,
    pub coeff_x: T,
    pub coeff_y: T,
    /// Unweighted squared-distance accuracy required on the regularized
    /// problem.
    pub inner_target: T,
}

fn positive<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveInput {
            name,
            value: v.as_f64(),
        })
    }
}

/// `eps/(12 D_y^2)` on `y`, target `2 eps/3`.
pub fn plan_scc<T: Scalar>(eps: T, d_y: T) -> Result<RegularizationPlan<T>> {
    positive("eps", eps)?;
    positive("D_y", d_y)?;
    Ok(RegularizationPlan {
        case: RegularizationCase::Scc,
        d_x: None,
        d_y,
        eps,
        coeff_x: T::zero(),
        coeff_y: eps / (T::lit(12.0) * d_y * d_y),
        inner_target: T::lit(2.0) * eps / T::lit(3.0),
    })
}

/// `eps/(16 D^2)` on both blocks, target `eps/2`.
pub fn plan_cc<T: Scalar>(eps: T, d_x: T, d_y: T) -> Result<RegularizationPlan<T>> {
    positive("eps", eps)?;
    positive("D_x", d_x)?;
    positive("D_y", d_y)?;
    let sixteen = T::lit(16.0);
    Ok(RegularizationPlan {
        case: RegularizationCase::Cc,
        d_x: Some(d_x),
        d_y,
        eps,
        coeff_x: eps / (sixteen * d_x * d_x),
        coeff_y: eps / (sixteen * d_y * d_y),
        inner_target: eps / T::lit(2.0),
    })
}

impl<T: Scalar> RegularizationPlan<T> {
    /// Dual regularization for `min p(x) s.t. B^T x = c`: `eps/(16 D_y^2)` on
    /// `y`, target `2 eps/3`.
    pub fn affine_constrained(eps: T, d_y: T) -> Result<Self> {
        let mut plan = plan_scc(eps, d_y)?;
        plan.coeff_y = eps / (T::lit(16.0) * d_y * d_y);
        Ok(plan)
    }

    /// Weighted-distance target that implies `inner_target` in plain squared
    /// distance for the given steps.
    pub fn weighted_target(&self, eta_x: T, eta_y: T) -> T {
        self.inner_target * (T::one() / eta_x).min(T::one() / eta_y)
    }
}

/// Problem with the plan's quadratics added to the coupling term.
#[derive(Debug, Clone)]
pub struct Regularized<P, T> {
    inner: P,
    pub coeff_x: T,
    pub coeff_y: T,
}

impl<P, T> Regularized<P, T> {
    pub fn inner(&self) -> &P {
        &self.inner
    }
}

/// Wraps `problem` per `plan`. `spec` may carry zero moduli where the plan
/// supplies them; the returned spec is validated.
pub fn apply_plan<T: Scalar, P: CompositeSaddle<T>>(
    problem: P,
    spec: &SmoothnessSpec<T>,
    plan: &RegularizationPlan<T>,
) -> Result<(Regularized<P, T>, SmoothnessSpec<T>)> {
    if plan.case == RegularizationCase::Scc && !(spec.mu_x > T::zero()) {
        return Err(Error::CaseMismatch(format!(
            "strongly-convex-concave plan needs mu_x > 0, got {}",
            spec.mu_x
        )));
    }
    let two = T::lit(2.0);
    let out = SmoothnessSpec {
        mu_x: spec.mu_x + two * plan.coeff_x,
        mu_y: spec.mu_y + two * plan.coeff_y,
        l_r: spec.l_r + two * plan.coeff_x.max(plan.coeff_y),
        ..*spec
    };
    validate_spec(&out)?;
    Ok((
        Regularized {
            inner: problem,
            coeff_x: plan.coeff_x,
            coeff_y: plan.coeff_y,
        },
        out,
    ))
}

impl<T: Scalar, P: CompositeSaddle<T>> CompositeSaddle<T> for Regularized<P, T> {
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }
    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }
    fn grad_p(&self, x: &[T]) -> Vec<T> {
        self.inner.grad_p(x)
    }
    fn grad_q(&self, y: &[T]) -> Vec<T> {
        self.inner.grad_q(y)
    }
    fn grad_r(&self, x: &[T], y: &[T]) -> (Vec<T>, Vec<T>) {
        let two = T::lit(2.0);
        let (mut gx, mut gy) = self.inner.grad_r(x, y);
        linalg::axpy(two * self.coeff_x, x, &mut gx);
        linalg::axpy(-two * self.coeff_y, y, &mut gy);
        (gx, gy)
    }
    fn value_p(&self, x: &[T]) -> Option<T> {
        self.inner.value_p(x)
    }
    fn value_q(&self, y: &[T]) -> Option<T> {
        self.inner.value_q(y)
    }
    fn value_r(&self, x: &[T], y: &[T]) -> Option<T> {
        Some(self.inner.value_r(x, y)? + self.coeff_x * linalg::norm_sq(x) - self.coeff_y * linalg::norm_sq(y))
    }
}

impl<P: CountedOracles, T> CountedOracles for Regularized<P, T> {
    fn counters(&self) -> OracleCounters {
        self.inner.counters()
    }
}

/// Regularizes, solves with the default sliding solver to the plan's target
/// and returns the report. The initial potential comes from the residual
/// bound; `base` supplies the iteration caps and inner settings.
pub fn solve_regularized<T, P>(
    problem: P,
    spec: &SmoothnessSpec<T>,
    plan: &RegularizationPlan<T>,
    start: &PointPair<T>,
    base: &SolveConfig<T>,
) -> Result<ConvergenceReport<T>>
where
    T: Scalar,
    P: CompositeSaddle<T> + CountedOracles,
{
    let (reg, reg_spec) = apply_plan(problem, spec, plan)?;
    let tuning = tune_parameters(&reg_spec)?;
    let mut cfg = base.clone();
    cfg.eps = plan.weighted_target(tuning.eta_x, tuning.eta_y);
    cfg.psi0 = Psi0Source::ResidualBound;
    cfg.known_solution = None;
    cfg.track_potential = false;
    solve_sliding(&reg, &reg_spec, start, &cfg)
}
