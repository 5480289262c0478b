//! Auxiliary subproblem of each outer step and the default extragradient
//! solver that drives it to the acceptance criterion.

use crate::error::{Error, Result};
use crate::linalg;
use crate::outer::{criterion_sides, OuterState, SolverTuning};
use crate::problem::{check_len, CompositeSaddle, PointPair, SmoothnessSpec};
use crate::scalar::Scalar;

/// Prox-regularized saddle subproblem
/// `<g_p, x> + ||x - x^k||^2/(2 eta_x) + R(x, y) - <g_q, y> - ||y - y^k||^2/(2 eta_y)`
/// built around one outer state.
#[derive(Debug)]
pub struct AuxiliaryProblem<'a, T, P: ?Sized> {
    problem: &'a P,
    state: &'a OuterState<T>,
    eta_x: T,
    eta_y: T,
}

/// Gradient of the auxiliary objective together with the coupling gradient it
/// was assembled from.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxGradient<T> {
    pub gx: Vec<T>,
    /// Gradient in `y` of the objective itself (not negated).
    pub gy: Vec<T>,
    pub grad_r_x: Vec<T>,
    pub grad_r_y: Vec<T>,
}

impl<'a, T: Scalar, P: CompositeSaddle<T> + ?Sized> AuxiliaryProblem<'a, T, P> {
    pub fn build(problem: &'a P, state: &'a OuterState<T>, tuning: &SolverTuning<T>) -> Result<Self> {
        let (d_x, d_y) = (problem.dim_x(), problem.dim_y());
        state.z.check_dims(d_x, d_y)?;
        check_len(&state.grad_p_g, d_x)?;
        check_len(&state.grad_q_g, d_y)?;
        Ok(Self {
            problem,
            state,
            eta_x: tuning.eta_x,
            eta_y: tuning.eta_y,
        })
    }

    pub fn problem(&self) -> &'a P {
        self.problem
    }
    pub fn x_k(&self) -> &[T] {
        &self.state.z.x
    }
    pub fn y_k(&self) -> &[T] {
        &self.state.z.y
    }
    pub fn grad_p_g(&self) -> &[T] {
        &self.state.grad_p_g
    }
    pub fn grad_q_g(&self) -> &[T] {
        &self.state.grad_q_g
    }
    pub fn eta_x(&self) -> T {
        self.eta_x
    }
    pub fn eta_y(&self) -> T {
        self.eta_y
    }

    pub fn start(&self) -> PointPair<T> {
        self.state.z.clone()
    }

    /// One `grad_r` call.
    pub fn gradient(&self, x: &[T], y: &[T]) -> AuxGradient<T> {
        let (rx, ry) = self.problem.grad_r(x, y);
        self.assemble(x, y, rx, ry)
    }

    /// Combines an already evaluated coupling gradient with the prox and
    /// linear terms.
    pub fn assemble(&self, x: &[T], y: &[T], grad_r_x: Vec<T>, grad_r_y: Vec<T>) -> AuxGradient<T> {
        let inv_x = T::one() / self.eta_x;
        let inv_y = T::one() / self.eta_y;
        let gx: Vec<T> = (0..x.len())
            .map(|i| self.state.grad_p_g[i] + (x[i] - self.state.z.x[i]) * inv_x + grad_r_x[i])
            .collect();
        let gy: Vec<T> = (0..y.len())
            .map(|i| grad_r_y[i] - self.state.grad_q_g[i] - (y[i] - self.state.z.y[i]) * inv_y)
            .collect();
        AuxGradient {
            gx,
            gy,
            grad_r_x,
            grad_r_y,
        }
    }

    /// Objective value; needs the coupling value oracle.
    pub fn value(&self, x: &[T], y: &[T]) -> Option<T> {
        let r = self.problem.value_r(x, y)?;
        let two = T::lit(2.0);
        Some(
            linalg::dot(&self.state.grad_p_g, x) + linalg::dist_sq(x, &self.state.z.x) / (two * self.eta_x) + r
                - linalg::dot(&self.state.grad_q_g, y)
                - linalg::dist_sq(y, &self.state.z.y) / (two * self.eta_y),
        )
    }
}

/// Change of variables `x = alpha_scale * u`, `y = beta_scale * v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rescaling<T> {
    pub alpha_scale: T,
    pub beta_scale: T,
}

impl<T: Scalar> Rescaling<T> {
    pub fn identity() -> Self {
        Self {
            alpha_scale: T::one(),
            beta_scale: T::one(),
        }
    }

    /// `max(alpha^2, beta^2)`, the factor on smoothness constants.
    pub fn smoothness_factor(&self) -> T {
        (self.alpha_scale * self.alpha_scale).max(self.beta_scale * self.beta_scale)
    }

    pub fn to_scaled(&self, z: &PointPair<T>) -> PointPair<T> {
        PointPair::new(
            linalg::scale(T::one() / self.alpha_scale, &z.x),
            linalg::scale(T::one() / self.beta_scale, &z.y),
        )
    }

    pub fn to_original(&self, w: &PointPair<T>) -> PointPair<T> {
        PointPair::new(
            linalg::scale(self.alpha_scale, &w.x),
            linalg::scale(self.beta_scale, &w.y),
        )
    }
}

pub fn compute_rescaling<T: Scalar>(tuning: &SolverTuning<T>) -> Result<Rescaling<T>> {
    let (ex, ey) = (tuning.eta_x, tuning.eta_y);
    if !(ex > T::zero() && ey > T::zero()) {
        return Err(Error::NonPositiveStep {
            eta_x: ex.as_f64(),
            eta_y: ey.as_f64(),
        });
    }
    // alpha^2 = sqrt(eta_x / eta_y), so alpha is the fourth root
    Ok(if ex > ey {
        Rescaling {
            alpha_scale: (ex / ey).sqrt().sqrt(),
            beta_scale: T::one(),
        }
    } else {
        Rescaling {
            alpha_scale: T::one(),
            beta_scale: (ey / ex).sqrt().sqrt(),
        }
    })
}

/// Upper bound on the Lipschitz constant of the rescaled auxiliary operator.
pub fn scaled_aux_smoothness<T: Scalar>(
    spec: &SmoothnessSpec<T>,
    tuning: &SolverTuning<T>,
    rescaling: &Rescaling<T>,
) -> T {
    let a2 = rescaling.alpha_scale * rescaling.alpha_scale;
    let b2 = rescaling.beta_scale * rescaling.beta_scale;
    a2.max(b2) * spec.l_r + (a2 / tuning.eta_x + a2 * spec.mu_x).max(b2 / tuning.eta_y + b2 * spec.mu_y)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerConfig<T> {
    /// Extragradient step in scaled coordinates; `None` means `1/(2 L_aux)`.
    pub step: Option<T>,
    pub max_inner: usize,
    /// Absolute escape hatch for the acceptance test.
    pub floor_tol: T,
}

impl<T: Scalar> Default for InnerConfig<T> {
    fn default() -> Self {
        Self {
            step: None,
            max_inner: 100_000,
            floor_tol: T::lit(1e-24),
        }
    }
}

impl<T: Scalar> InnerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.step {
            if !(s > T::zero()) {
                return Err(Error::NonPositiveInput {
                    name: "inner step",
                    value: s.as_f64(),
                });
            }
        }
        if self.max_inner == 0 {
            return Err(Error::NonPositiveInput {
                name: "max_inner",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// Accepted point of one auxiliary solve.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolution<T> {
    pub point: PointPair<T>,
    /// Coupling gradient at `point`, reused by the outer update.
    pub grad_r_x: Vec<T>,
    pub grad_r_y: Vec<T>,
    /// Auxiliary gradient at `point`.
    pub aux_gx: Vec<T>,
    pub aux_gy: Vec<T>,
    pub iterations: usize,
    pub criterion_lhs: T,
    pub criterion_rhs: T,
    /// Accepted because the iteration stopped moving in floating point
    /// before the criterion could be met.
    pub stalled: bool,
}

/// Strategy for solving the auxiliary subproblem to the acceptance criterion.
pub trait AuxiliarySolver<T: Scalar, P: ?Sized> {
    fn solve_aux(
        &self,
        aux: &AuxiliaryProblem<'_, T, P>,
        spec: &SmoothnessSpec<T>,
        tuning: &SolverTuning<T>,
        config: &InnerConfig<T>,
        outer_iteration: usize,
    ) -> Result<InnerSolution<T>>;
}

/// Extragradient on the rescaled operator `(a grad_x A, -b grad_y A)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Extragradient;

/// `next` differs from `prev` by no more than rounding noise, so further
/// iterations cannot improve the acceptance test.
pub(crate) fn at_rounding_level<T: Scalar>(next: &[T], prev: &[T]) -> bool {
    let scale = prev.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = T::lit(16.0) * T::epsilon() * scale;
    next.iter().zip(prev).all(|(&a, &b)| (a - b).abs() <= tol)
}

/// Outcome of testing one candidate point against the acceptance criterion.
pub(crate) fn accept_if<T: Scalar>(
    aux_point: &PointPair<T>,
    g: &AuxGradient<T>,
    x_k: &[T],
    y_k: &[T],
    tuning: &SolverTuning<T>,
    floor_tol: T,
) -> (bool, T, T) {
    let dx = linalg::sub(&aux_point.x, x_k);
    let dy = linalg::sub(&aux_point.y, y_k);
    let (lhs, rhs) = criterion_sides(&g.gx, &g.gy, &dx, &dy, tuning);
    (lhs <= rhs || lhs <= floor_tol, lhs, rhs)
}

impl<T: Scalar, P: CompositeSaddle<T> + ?Sized> AuxiliarySolver<T, P> for Extragradient {
    fn solve_aux(
        &self,
        aux: &AuxiliaryProblem<'_, T, P>,
        spec: &SmoothnessSpec<T>,
        tuning: &SolverTuning<T>,
        config: &InnerConfig<T>,
        outer_iteration: usize,
    ) -> Result<InnerSolution<T>> {
        let resc = compute_rescaling(tuning)?;
        let step = config
            .step
            .unwrap_or_else(|| T::one() / (T::lit(2.0) * scaled_aux_smoothness(spec, tuning, &resc)));
        let (a, b) = (resc.alpha_scale, resc.beta_scale);
        let (sa, sb) = (step * a, step * b);

        let start = aux.start();
        let mut w = resc.to_scaled(&start);
        let mut z = start;
        let mut g = aux.gradient(&z.x, &z.y);
        let mut iterations = 0;
        loop {
            let (ok, lhs, rhs) = accept_if(&z, &g, aux.x_k(), aux.y_k(), tuning, config.floor_tol);
            let mut wh = w.clone();
            let mut stalled = false;
            if !ok {
                linalg::axpy(-sa, &g.gx, &mut wh.x);
                linalg::axpy(sb, &g.gy, &mut wh.y);
                // the operator step no longer moves the iterate in floating point
                stalled = at_rounding_level(&wh.x, &w.x) && at_rounding_level(&wh.y, &w.y);
            }
            if ok || stalled {
                return Ok(InnerSolution {
                    point: z,
                    grad_r_x: g.grad_r_x,
                    grad_r_y: g.grad_r_y,
                    aux_gx: g.gx,
                    aux_gy: g.gy,
                    iterations,
                    criterion_lhs: lhs,
                    criterion_rhs: rhs,
                    stalled,
                });
            }
            if iterations == config.max_inner {
                return Err(Error::InnerBudgetExhausted {
                    outer_iteration,
                    iterations,
                });
            }
            iterations += 1;
            let zh = resc.to_original(&wh);
            let gh = aux.gradient(&zh.x, &zh.y);
            // full step from w with the half-step operator
            linalg::axpy(-sa, &gh.gx, &mut w.x);
            linalg::axpy(sb, &gh.gy, &mut w.y);
            z = resc.to_original(&w);
            if !z.is_finite() {
                return Err(Error::NonFiniteIterate {
                    iteration: outer_iteration,
                });
            }
            g = aux.gradient(&z.x, &z.y);
        }
    }
}

/// Accuracy target for the auxiliary solve implied by the acceptance
/// criterion; diagnostic only.
pub fn gamma_target<T: Scalar>(tuning: &SolverTuning<T>, spec: &SmoothnessSpec<T>, dx: &[T], dy: &[T]) -> Result<T> {
    let (ex, ey) = (tuning.eta_x, tuning.eta_y);
    if !(ex > T::zero() && ey > T::zero()) {
        return Err(Error::NonPositiveStep {
            eta_x: ex.as_f64(),
            eta_y: ey.as_f64(),
        });
    }
    let six = T::lit(6.0);
    let num = linalg::norm_sq(dx) / (six * ex) + linalg::norm_sq(dy) / (six * ey);
    let lx = spec.l_r + T::one() / ex;
    let ly = spec.l_r + T::one() / ey;
    Ok(num / (ex * lx * lx).max(ey * ly * ly))
}
