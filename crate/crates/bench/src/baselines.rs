//! Reference first-order methods that treat all oracles alike.

use saddle_core::linalg::{axpy, lin_comb, norm, norm_sq, sub};
use saddle_core::{CompositeSaddle, CountedOracles, OracleCounters, Point, Spec};

use crate::error::{BenchError, Result};

/// Result of a baseline run. Stopping is certified through strong
/// monotonicity: the run ends once a computable bound guarantees
/// `||z - z*||^2 <= eps`, or when the iteration cap is hit (`exhausted`).
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineRun {
    pub final_pair: Point,
    pub counters: OracleCounters,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub exhausted: bool,
}

impl BaselineRun {
    /// Turns an exhausted run into [`BenchError::BudgetExhausted`].
    pub fn into_result(self) -> Result<BaselineRun> {
        if self.exhausted {
            Err(BenchError::BudgetExhausted {
                iterations: self.iterations,
            })
        } else {
            Ok(self)
        }
    }
}

fn check_finite(z: &Point, iterations: usize) -> Result<()> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(saddle_core::Error::NonFiniteIterate { iteration: iterations }.into())
    }
}

fn operator<P: CompositeSaddle<f64> + ?Sized>(problem: &P, z: &Point) -> Point {
    saddle_core::problem::saddle_operator(problem, z)
}

fn with_iterations(mut c: OracleCounters, outer: usize, inner: usize) -> OracleCounters {
    c.outer_iterations = outer as u64;
    c.inner_iterations = inner as u64;
    c
}

/// Extragradient on `F(z) = (grad p + grad_x R, grad q - grad_y R)` with
/// step `1/(2 (L_p + L_q + L_R))`. One evaluation of `F` at the start, then
/// two per iteration, each touching all three oracles.
pub fn baseline_extragradient<P>(
    problem: &P,
    spec: &Spec,
    start: &Point,
    eps: f64,
    max_iter: usize,
) -> Result<BaselineRun>
where
    P: CompositeSaddle<f64> + CountedOracles + ?Sized,
{
    let l_total = spec.l_p + spec.l_q + spec.l_r;
    let mu = spec.mu_x.min(spec.mu_y);
    if !(mu > 0.0 && l_total > 0.0) {
        return Err(saddle_core::Error::NonPositiveModulus {
            mu_x: spec.mu_x,
            mu_y: spec.mu_y,
        }
        .into());
    }
    let step = 1.0 / (2.0 * l_total);
    let base = problem.counters();
    let mut z = start.clone();
    let mut f = operator(problem, &z);
    let mut it = 0;
    let mut exhausted = false;
    loop {
        // ||z - z*|| <= ||F(z)|| / mu under strong monotonicity
        if norm_sq(&f.x) + norm_sq(&f.y) <= mu * mu * eps {
            break;
        }
        if it == max_iter {
            exhausted = true;
            break;
        }
        let half = Point::new(lin_comb(1.0, &z.x, -step, &f.x), lin_comb(1.0, &z.y, -step, &f.y));
        let fh = operator(problem, &half);
        z = Point::new(lin_comb(1.0, &z.x, -step, &fh.x), lin_comb(1.0, &z.y, -step, &fh.y));
        it += 1;
        check_finite(&z, it)?;
        f = operator(problem, &z);
    }
    Ok(BaselineRun {
        final_pair: z,
        counters: with_iterations(problem.counters().since(&base), it, 0),
        iterations: it,
        inner_iterations: 0,
        exhausted,
    })
}

/// Per-call cap on the inner maximization of [`baseline_agd_joint`].
pub const AGD_INNER_CAP: usize = 100_000;

/// Nesterov's method on the primal `phi(x) = p(x) + max_y {R(x, y) - q(y)}`,
/// which is `mu_x`-strongly convex and `(L_p + L_R + L_R^2/mu_y)`-smooth.
/// Each primal gradient needs the inner maximizer, computed by Nesterov's
/// method on the `mu_y`-strongly concave inner problem (warm started), to an
/// accuracy that keeps the gradient error below a quarter of the final
/// distance budget.
pub fn baseline_agd_joint<P>(problem: &P, spec: &Spec, start: &Point, eps: f64, max_iter: usize) -> Result<BaselineRun>
where
    P: CompositeSaddle<f64> + CountedOracles + ?Sized,
{
    let (mu_x, mu_y, l_r) = (spec.mu_x, spec.mu_y, spec.l_r);
    if !(mu_x > 0.0 && mu_y > 0.0) {
        return Err(saddle_core::Error::NonPositiveModulus { mu_x, mu_y }.into());
    }
    let l_phi = spec.l_p + l_r + l_r * l_r / mu_y;
    let momentum = |l: f64, mu: f64| (l.sqrt() - mu.sqrt()) / (l.sqrt() + mu.sqrt());
    let beta = momentum(l_phi, mu_x);
    let l_in = spec.l_q + l_r;
    let beta_in = momentum(l_in, mu_y);
    let r = eps.sqrt();
    // bound on ||y - y(u)|| that leaves the primal gradient error harmless
    let ey_tol = mu_x * r * mu_y / (8.0 * (l_r + mu_y).powi(2));
    let g_tol = mu_y * ey_tol;

    let base = problem.counters();
    let mut x = start.x.clone();
    let mut x_prev = x.clone();
    let mut y = start.y.clone();
    let mut inner_total = 0usize;
    let mut it = 0usize;
    loop {
        let u: Vec<f64> = lin_comb(1.0 + beta, &x, -beta, &x_prev);
        // inner: ascent on y -> R(u, y) - q(y)
        let mut y_prev = y.clone();
        let mut inner = 0usize;
        let capped;
        let (rx, gy_norm) = loop {
            let v = lin_comb(1.0 + beta_in, &y, -beta_in, &y_prev);
            let (rx_v, ry_v) = problem.grad_r(&u, &v);
            let gy = sub(&ry_v, &problem.grad_q(&v));
            let gn = norm(&gy);
            if gn <= g_tol || inner == AGD_INNER_CAP {
                capped = gn > g_tol;
                y = v;
                break (rx_v, gn);
            }
            y_prev = std::mem::replace(&mut y, lin_comb(1.0, &v, 1.0 / l_in, &gy));
            inner += 1;
        };
        inner_total += inner;
        let mut g = problem.grad_p(&u);
        axpy(1.0, &rx, &mut g);
        let ey = gy_norm / mu_y;
        let dx = (norm(&g) + l_r * ey) / mu_x;
        let dy = ey + l_r / mu_y * dx;
        let done = dx * dx + dy * dy <= eps;
        if done || capped || it == max_iter {
            return Ok(BaselineRun {
                final_pair: Point::new(u, y),
                counters: with_iterations(problem.counters().since(&base), it, inner_total),
                iterations: it,
                inner_iterations: inner_total,
                exhausted: !done,
            });
        }
        x_prev = std::mem::replace(&mut x, lin_comb(1.0, &u, -1.0 / l_phi, &g));
        it += 1;
        check_finite(&Point::new(x.clone(), y.clone()), it)?;
    }
}
