//! Bilinear coupling `R(x, y) = x^T B y`: composite splitting, elimination of
//! one block from the auxiliary problem, accelerated gradient inner solves and
//! the affinely constrained / linear-composite reductions.
//!
//! In this mode the `grad_r` counter tallies applications of `B` or `B^T`.

use std::cell::{Cell, RefCell};
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::inner::{accept_if, at_rounding_level, AuxiliaryProblem, AuxiliarySolver, InnerConfig, InnerSolution};
use crate::linalg::{self, DenseMatrix, LinearMap};
use crate::outer::{solve, tune_parameters, ConvergenceReport, Psi0Source, SolveConfig, SolverTuning};
use crate::problem::{
    check_len, CompositeSaddle, CountedOracles, IsotropicQuadratic, OracleCounters, PointPair, SmoothFunction,
    SmoothnessSpec,
};
use crate::regularization::{plan_cc, RegularizationPlan};
use crate::scalar::Scalar;

/// Constants of `p(x) + x^T B y - q(y)`.
///
/// `lambda_max` and `lambda_min` bound the spectrum of the smaller Gram
/// matrix (`B B^T` when `d_x <= d_y`, else `B^T B`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilinearConstants<T> {
    pub l_p: T,
    pub mu_p: T,
    pub l_q: T,
    pub mu_q: T,
    pub lambda_max: T,
    pub lambda_min: T,
}

pub trait BilinearProblem<T: Scalar> {
    fn dims(&self) -> (usize, usize);
    fn grad_p(&self, x: &[T]) -> Vec<T>;
    fn grad_q(&self, y: &[T]) -> Vec<T>;
    fn value_p(&self, _x: &[T]) -> Option<T> {
        None
    }
    fn value_q(&self, _y: &[T]) -> Option<T> {
        None
    }
    /// `B y`
    fn apply_b(&self, y: &[T]) -> Vec<T>;
    /// `B^T x`
    fn apply_bt(&self, x: &[T]) -> Vec<T>;
    fn constants(&self) -> BilinearConstants<T>;
}

impl<T: Scalar, BP: BilinearProblem<T> + ?Sized> BilinearProblem<T> for &BP {
    fn dims(&self) -> (usize, usize) {
        (**self).dims()
    }
    fn grad_p(&self, x: &[T]) -> Vec<T> {
        (**self).grad_p(x)
    }
    fn grad_q(&self, y: &[T]) -> Vec<T> {
        (**self).grad_q(y)
    }
    fn value_p(&self, x: &[T]) -> Option<T> {
        (**self).value_p(x)
    }
    fn value_q(&self, y: &[T]) -> Option<T> {
        (**self).value_q(y)
    }
    fn apply_b(&self, y: &[T]) -> Vec<T> {
        (**self).apply_b(y)
    }
    fn apply_bt(&self, x: &[T]) -> Vec<T> {
        (**self).apply_bt(x)
    }
    fn constants(&self) -> BilinearConstants<T> {
        (**self).constants()
    }
}

/// A bilinear problem assembled from two smooth functions and a linear map.
#[derive(Clone, Debug)]
pub struct BilinearInstance<T, M, P, Q> {
    pub p: P,
    pub q: Q,
    pub b: M,
    pub constants: BilinearConstants<T>,
}

impl<T, M, P, Q> BilinearInstance<T, M, P, Q>
where
    T: Scalar,
    M: LinearMap<T>,
    P: SmoothFunction<T>,
    Q: SmoothFunction<T>,
{
    pub fn new(p: P, q: Q, b: M, constants: BilinearConstants<T>) -> Result<Self> {
        check_len(&vec![(); p.dim()], b.rows())?;
        check_len(&vec![(); q.dim()], b.cols())?;
        Ok(Self { p, q, b, constants })
    }
}

impl<T, M, P, Q> BilinearProblem<T> for BilinearInstance<T, M, P, Q>
where
    T: Scalar,
    M: LinearMap<T>,
    P: SmoothFunction<T>,
    Q: SmoothFunction<T>,
{
    fn dims(&self) -> (usize, usize) {
        (self.b.rows(), self.b.cols())
    }
    fn grad_p(&self, x: &[T]) -> Vec<T> {
        self.p.gradient(x)
    }
    fn grad_q(&self, y: &[T]) -> Vec<T> {
        self.q.gradient(y)
    }
    fn value_p(&self, x: &[T]) -> Option<T> {
        self.p.value(x)
    }
    fn value_q(&self, y: &[T]) -> Option<T> {
        self.q.value(y)
    }
    fn apply_b(&self, y: &[T]) -> Vec<T> {
        self.b.apply(y)
    }
    fn apply_bt(&self, x: &[T]) -> Vec<T> {
        self.b.apply_transpose(x)
    }
    fn constants(&self) -> BilinearConstants<T> {
        self.constants
    }
}

/// Composite view of a bilinear problem with the strong convexity moved into
/// the coupling: `p~ = p - (mu_p/2)||x||^2`, `q~ = q - (mu_q/2)||y||^2` and
/// `R = (mu_p/2)||x||^2 + x^T B y - (mu_q/2)||y||^2`.
///
/// Counts calls itself; `grad_r` costs two matrix applications.
#[derive(Debug)]
pub struct BilinearSplit<BP> {
    inner: BP,
    grad_p: Cell<u64>,
    grad_q: Cell<u64>,
    matvecs: Cell<u64>,
}

fn bump(c: &Cell<u64>, n: u64) {
    c.set(c.get() + n);
}

pub fn split_bilinear<T: Scalar, BP: BilinearProblem<T>>(bp: BP) -> Result<(BilinearSplit<BP>, SmoothnessSpec<T>)> {
    let c = bp.constants();
    if !(c.mu_p > T::zero() && c.mu_q > T::zero()) {
        return Err(Error::NonPositiveModulus {
            mu_x: c.mu_p.as_f64(),
            mu_y: c.mu_q.as_f64(),
        });
    }
    if c.lambda_max < T::zero() || c.lambda_min < T::zero() || c.lambda_min > c.lambda_max {
        return Err(Error::InconsistentConstants(format!(
            "Gram spectrum bounds [{}, {}]",
            c.lambda_min, c.lambda_max
        )));
    }
    let spec = SmoothnessSpec::new(
        (c.l_p - c.mu_p).max(T::zero()),
        (c.l_q - c.mu_q).max(T::zero()),
        c.mu_p + c.mu_q + c.lambda_max.sqrt(),
        c.mu_p,
        c.mu_q,
    );
    Ok((BilinearSplit::new(bp), spec))
}

impl<BP> BilinearSplit<BP> {
    pub fn new(inner: BP) -> Self {
        Self {
            inner,
            grad_p: Cell::new(0),
            grad_q: Cell::new(0),
            matvecs: Cell::new(0),
        }
    }

    pub fn inner(&self) -> &BP {
        &self.inner
    }
}

impl<BP> BilinearSplit<BP> {
    /// Counted `B y`.
    pub fn apply_b<T: Scalar>(&self, y: &[T]) -> Vec<T>
    where
        BP: BilinearProblem<T>,
    {
        bump(&self.matvecs, 1);
        self.inner.apply_b(y)
    }

    /// Counted `B^T x`.
    pub fn apply_bt<T: Scalar>(&self, x: &[T]) -> Vec<T>
    where
        BP: BilinearProblem<T>,
    {
        bump(&self.matvecs, 1);
        self.inner.apply_bt(x)
    }

    pub fn constants<T: Scalar>(&self) -> BilinearConstants<T>
    where
        BP: BilinearProblem<T>,
    {
        self.inner.constants()
    }
}

impl<BP> CountedOracles for BilinearSplit<BP> {
    fn counters(&self) -> OracleCounters {
        OracleCounters {
            grad_p: self.grad_p.get(),
            grad_q: self.grad_q.get(),
            grad_r: self.matvecs.get(),
            ..OracleCounters::default()
        }
    }
}

impl<T: Scalar, BP: BilinearProblem<T>> CompositeSaddle<T> for BilinearSplit<BP> {
    fn dim_x(&self) -> usize {
        self.inner.dims().0
    }
    fn dim_y(&self) -> usize {
        self.inner.dims().1
    }
    fn grad_p(&self, x: &[T]) -> Vec<T> {
        bump(&self.grad_p, 1);
        let mut g = self.inner.grad_p(x);
        linalg::axpy(-self.inner.constants().mu_p, x, &mut g);
        g
    }
    fn grad_q(&self, y: &[T]) -> Vec<T> {
        bump(&self.grad_q, 1);
        let mut g = self.inner.grad_q(y);
        linalg::axpy(-self.inner.constants().mu_q, y, &mut g);
        g
    }
    fn grad_r(&self, x: &[T], y: &[T]) -> (Vec<T>, Vec<T>) {
        let c = self.inner.constants();
        let mut gx = self.apply_b(y);
        linalg::axpy(c.mu_p, x, &mut gx);
        let mut gy = self.apply_bt(x);
        linalg::axpy(-c.mu_q, y, &mut gy);
        (gx, gy)
    }
    fn value_p(&self, x: &[T]) -> Option<T> {
        let mu = self.inner.constants().mu_p;
        Some(self.inner.value_p(x)? - T::lit(0.5) * mu * linalg::norm_sq(x))
    }
    fn value_q(&self, y: &[T]) -> Option<T> {
        let mu = self.inner.constants().mu_q;
        Some(self.inner.value_q(y)? - T::lit(0.5) * mu * linalg::norm_sq(y))
    }
    fn value_r(&self, x: &[T], y: &[T]) -> Option<T> {
        // diagnostics only: uncounted
        let c = self.inner.constants();
        let half = T::lit(0.5);
        let by = self.inner.apply_b(y);
        Some(half * c.mu_p * linalg::norm_sq(x) + linalg::dot(x, &by) - half * c.mu_q * linalg::norm_sq(y))
    }
}

/// Symmetric operator `v -> A v` of a quadratic `<x, A x> + <b, x> + c`.
pub trait QuadraticOperator<T: Scalar> {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[T]) -> Vec<T>;
}

impl<T: Scalar> QuadraticOperator<T> for DenseMatrix<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, v: &[T]) -> Vec<T> {
        self.matvec(v)
    }
}

/// `f(x) = <x, A x> + <b, x> + c`, so `grad f = 2 A x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm<T, A> {
    pub a: A,
    pub b: Vec<T>,
    pub c: T,
}

impl<T: Scalar, A: QuadraticOperator<T>> QuadraticForm<T, A> {
    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let mut g = linalg::scale(T::lit(2.0), &self.a.apply(x));
        linalg::axpy(T::one(), &self.b, &mut g);
        g
    }

    pub fn value(&self, x: &[T]) -> T {
        linalg::dot(x, &self.a.apply(x)) + linalg::dot(&self.b, x) + self.c
    }
}

/// Nesterov's method with constant momentum for an `mu`-strongly convex,
/// `l`-smooth function. `eval` sees each extrapolated point and either
/// returns its gradient or stops the run. `None` means the budget ran out.
fn nesterov<T: Scalar, R>(
    start: Vec<T>,
    mu: T,
    l: T,
    max_iter: usize,
    mut eval: impl FnMut(&[T], usize) -> Result<ControlFlow<R, Vec<T>>>,
) -> Result<Option<R>> {
    let (sl, sm) = (l.sqrt(), mu.sqrt());
    let beta = (sl - sm) / (sl + sm);
    let step = T::one() / l;
    let mut prev = start.clone();
    let mut t = start;
    for it in 0..=max_iter {
        let g = match eval(&t, it)? {
            ControlFlow::Break(r) => return Ok(Some(r)),
            ControlFlow::Continue(g) => g,
        };
        if it == max_iter {
            break;
        }
        let mut next = t;
        linalg::axpy(-step, &g, &mut next);
        t = linalg::lin_comb(T::one() + beta, &next, -beta, &prev);
        prev = next;
    }
    Ok(None)
}

/// Minimizes `<x, A x> + <b, x>` for `A` with spectrum in `[mu_a, l_a]` until
/// `||2 A x + b|| <= tol`. Returns the point and the number of steps.
pub fn agd_quadratic<T: Scalar, A: QuadraticOperator<T>>(
    form: &QuadraticForm<T, A>,
    mu_a: T,
    l_a: T,
    start: &[T],
    tol: T,
    max_iter: usize,
) -> Result<(Vec<T>, usize)> {
    if !(mu_a > T::zero() && l_a >= mu_a) {
        return Err(Error::InconsistentConstants(format!(
            "quadratic spectrum bounds [{mu_a}, {l_a}]"
        )));
    }
    check_len(start, form.a.dim())?;
    let two = T::lit(2.0);
    nesterov(start.to_vec(), two * mu_a, two * l_a, max_iter, |x, it| {
        let g = form.gradient(x);
        Ok(if linalg::norm(&g) <= tol {
            ControlFlow::Break((x.to_vec(), it))
        } else {
            ControlFlow::Continue(g)
        })
    })?
    .ok_or(Error::BudgetExhausted { iterations: max_iter })
}

/// Which block the elimination removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EliminatedBlock {
    /// Solve in `x`; `y(x) = (B^T x + w) / tau`.
    Y,
    /// Solve in `y`; `x(y) = (v - B y) / sigma`.
    X,
}

/// Reduced quadratic of one auxiliary problem after eliminating a block.
///
/// With `sigma = 1/eta_x + mu_p`, `tau = 1/eta_y + mu_q`,
/// `v = x^k/eta_x - g_p` and `w = y^k/eta_y - g_q`:
/// eliminating `y` gives `A = (sigma tau I + B B^T)/2`, `b = B w - tau v`
/// (the auxiliary objective scaled by `tau`); eliminating `x` gives
/// `A = (sigma tau I + B^T B)/2`, `b = -B^T v - sigma w` (the negated
/// objective scaled by `sigma`).
#[derive(Debug)]
pub struct Elimination<'a, T, BP> {
    split: &'a BilinearSplit<BP>,
    pub block: EliminatedBlock,
    pub sigma: T,
    pub tau: T,
    pub b: Vec<T>,
    pub c: T,
    v: Vec<T>,
    w: Vec<T>,
    /// `B w` when eliminating `y`, `B^T v` when eliminating `x`.
    partner_offset: Vec<T>,
    mu_p: T,
    mu_q: T,
}

/// Point recovered from the reduced variable, with everything the inner
/// solver needs.
#[derive(Clone, Debug, PartialEq)]
pub struct EliminatedPoint<T> {
    pub point: PointPair<T>,
    /// Gradient of the reduced quadratic.
    pub form_gradient: Vec<T>,
    pub grad_r_x: Vec<T>,
    pub grad_r_y: Vec<T>,
}

fn elimination_parts<T: Scalar, P: CompositeSaddle<T> + ?Sized>(
    aux: &AuxiliaryProblem<'_, T, P>,
    mu_p: T,
    mu_q: T,
) -> (T, T, Vec<T>, Vec<T>) {
    let (ex, ey) = (aux.eta_x(), aux.eta_y());
    let sigma = T::one() / ex + mu_p;
    let tau = T::one() / ey + mu_q;
    let v = linalg::lin_comb(T::one() / ex, aux.x_k(), -T::one(), aux.grad_p_g());
    let w = linalg::lin_comb(T::one() / ey, aux.y_k(), -T::one(), aux.grad_q_g());
    (sigma, tau, v, w)
}

/// Eliminates `y`; one counted matrix application (`B w`).
pub fn eliminate_y<'a, T: Scalar, BP: BilinearProblem<T>>(
    aux: &AuxiliaryProblem<'_, T, BilinearSplit<BP>>,
    split: &'a BilinearSplit<BP>,
) -> Elimination<'a, T, BP> {
    let c = split.constants();
    let (sigma, tau, v, w) = elimination_parts(aux, c.mu_p, c.mu_q);
    let bw = split.apply_b(&w);
    let b = linalg::lin_comb(T::one(), &bw, -tau, &v);
    let two = T::lit(2.0);
    let offset = tau * linalg::norm_sq(aux.x_k()) / (two * aux.eta_x()) + linalg::norm_sq(&w) / two
        - tau * linalg::norm_sq(aux.y_k()) / (two * aux.eta_y());
    Elimination {
        split,
        block: EliminatedBlock::Y,
        sigma,
        tau,
        b,
        c: offset,
        v,
        w,
        partner_offset: bw,
        mu_p: c.mu_p,
        mu_q: c.mu_q,
    }
}

/// Eliminates `x`; one counted matrix application (`B^T v`).
pub fn eliminate_x<'a, T: Scalar, BP: BilinearProblem<T>>(
    aux: &AuxiliaryProblem<'_, T, BilinearSplit<BP>>,
    split: &'a BilinearSplit<BP>,
) -> Elimination<'a, T, BP> {
    let c = split.constants();
    let (sigma, tau, v, w) = elimination_parts(aux, c.mu_p, c.mu_q);
    let btv = split.apply_bt(&v);
    let b = linalg::lin_comb(-T::one(), &btv, -sigma, &w);
    let two = T::lit(2.0);
    let offset = linalg::norm_sq(&v) / two - sigma * linalg::norm_sq(aux.x_k()) / (two * aux.eta_x())
        + sigma * linalg::norm_sq(aux.y_k()) / (two * aux.eta_y());
    Elimination {
        split,
        block: EliminatedBlock::X,
        sigma,
        tau,
        b,
        c: offset,
        v,
        w,
        partner_offset: btv,
        mu_p: c.mu_p,
        mu_q: c.mu_q,
    }
}

impl<T: Scalar, BP: BilinearProblem<T>> Elimination<'_, T, BP> {
    pub fn shift(&self) -> T {
        self.sigma * self.tau
    }

    /// `(first, gram)`: `B^T s, B B^T s` (eliminating `y`) or
    /// `B s, B^T B s` (eliminating `x`). Two counted applications.
    fn gram_parts(&self, s: &[T]) -> (Vec<T>, Vec<T>) {
        match self.block {
            EliminatedBlock::Y => {
                let u = self.split.apply_bt(s);
                let g = self.split.apply_b(&u);
                (u, g)
            }
            EliminatedBlock::X => {
                let u = self.split.apply_b(s);
                let g = self.split.apply_bt(&u);
                (u, g)
            }
        }
    }

    /// Extreme eigenvalues of `A` implied by the declared Gram spectrum.
    pub fn spectrum_bounds(&self) -> (T, T) {
        let c = self.split.constants();
        let half = T::lit(0.5);
        (
            half * (self.shift() + c.lambda_min),
            half * (self.shift() + c.lambda_max),
        )
    }

    /// Recovers the full pair from the reduced variable `s`, along with the
    /// reduced gradient and the coupling gradient. Two counted applications.
    pub fn evaluate(&self, s: &[T]) -> EliminatedPoint<T> {
        let (u, gram) = self.gram_parts(s);
        let shift = self.shift();
        let form_gradient: Vec<T> = (0..s.len()).map(|i| shift * s[i] + gram[i] + self.b[i]).collect();
        match self.block {
            EliminatedBlock::Y => {
                let inv = T::one() / self.tau;
                let y: Vec<T> = u.iter().zip(&self.w).map(|(&u, &w)| (u + w) * inv).collect();
                // B y = (B B^T x + B w) / tau
                let grad_r_x: Vec<T> = (0..s.len())
                    .map(|i| self.mu_p * s[i] + (gram[i] + self.partner_offset[i]) * inv)
                    .collect();
                let grad_r_y: Vec<T> = u.iter().zip(&y).map(|(&u, &y)| u - self.mu_q * y).collect();
                EliminatedPoint {
                    point: PointPair::new(s.to_vec(), y),
                    form_gradient,
                    grad_r_x,
                    grad_r_y,
                }
            }
            EliminatedBlock::X => {
                let inv = T::one() / self.sigma;
                let x: Vec<T> = self.v.iter().zip(&u).map(|(&v, &u)| (v - u) * inv).collect();
                let grad_r_x: Vec<T> = x.iter().zip(&u).map(|(&x, &u)| self.mu_p * x + u).collect();
                // B^T x = (B^T v - B^T B y) / sigma
                let grad_r_y: Vec<T> = (0..s.len())
                    .map(|i| (self.partner_offset[i] - gram[i]) * inv - self.mu_q * s[i])
                    .collect();
                EliminatedPoint {
                    point: PointPair::new(x, s.to_vec()),
                    form_gradient,
                    grad_r_x,
                    grad_r_y,
                }
            }
        }
    }

    /// Borrowing view usable with [`agd_quadratic`].
    pub fn form(&self) -> QuadraticForm<T, GramOperator<'_, '_, T, BP>> {
        QuadraticForm {
            a: GramOperator { elim: self },
            b: self.b.clone(),
            c: self.c,
        }
    }
}

/// `v -> (sigma tau v + Gram v) / 2`, two counted applications per call.
#[derive(Debug)]
pub struct GramOperator<'e, 'a, T, BP> {
    elim: &'e Elimination<'a, T, BP>,
}

impl<T: Scalar, BP: BilinearProblem<T>> QuadraticOperator<T> for GramOperator<'_, '_, T, BP> {
    fn dim(&self) -> usize {
        self.elim.b.len()
    }
    fn apply(&self, v: &[T]) -> Vec<T> {
        let (_, g) = self.elim.gram_parts(v);
        let half = T::lit(0.5);
        let shift = self.elim.shift();
        v.iter().zip(&g).map(|(&v, &g)| half * (shift * v + g)).collect()
    }
}

/// Snapshot of an auxiliary problem handled by [`EliminationAgd`].
#[derive(Clone, Debug, PartialEq)]
pub struct AuxSubproblem<T> {
    pub outer_iteration: usize,
    pub x_k: Vec<T>,
    pub y_k: Vec<T>,
    pub grad_p_g: Vec<T>,
    pub grad_q_g: Vec<T>,
    pub eta_x: T,
    pub eta_y: T,
    pub accepted: PointPair<T>,
    pub iterations: usize,
}

/// Auxiliary solver for [`BilinearSplit`] problems: eliminates the larger
/// block in closed form and runs Nesterov's method on the reduced quadratic
/// until the acceptance criterion holds.
#[derive(Debug, Default)]
pub struct EliminationAgd<T> {
    record_limit: usize,
    recorded: RefCell<Vec<AuxSubproblem<T>>>,
}

impl<T: Scalar> EliminationAgd<T> {
    pub fn new() -> Self {
        Self {
            record_limit: 0,
            recorded: RefCell::new(Vec::new()),
        }
    }

    /// Keeps snapshots of the first `limit` auxiliary problems.
    pub fn recording(limit: usize) -> Self {
        Self {
            record_limit: limit,
            recorded: RefCell::new(Vec::new()),
        }
    }

    pub fn take_recorded(&self) -> Vec<AuxSubproblem<T>> {
        self.recorded.take()
    }
}

impl<T: Scalar, BP: BilinearProblem<T>> AuxiliarySolver<T, BilinearSplit<BP>> for EliminationAgd<T> {
    fn solve_aux(
        &self,
        aux: &AuxiliaryProblem<'_, T, BilinearSplit<BP>>,
        _spec: &SmoothnessSpec<T>,
        tuning: &SolverTuning<T>,
        config: &InnerConfig<T>,
        outer_iteration: usize,
    ) -> Result<InnerSolution<T>> {
        let split = aux.problem();
        let (d_x, d_y) = split.inner().dims();
        let (elim, start) = if d_x <= d_y {
            (eliminate_y(aux, split), aux.x_k().to_vec())
        } else {
            (eliminate_x(aux, split), aux.y_k().to_vec())
        };
        let (mu_a, l_a) = elim.spectrum_bounds();
        let two = T::lit(2.0);
        let step = T::one() / (two * l_a);
        let found = nesterov(start, two * mu_a, two * l_a, config.max_inner, |s, it| {
            let e = elim.evaluate(s);
            if !e.point.is_finite() {
                return Err(Error::NonFiniteIterate {
                    iteration: outer_iteration,
                });
            }
            let g = aux.assemble(&e.point.x, &e.point.y, e.grad_r_x, e.grad_r_y);
            let (ok, lhs, rhs) = accept_if(&e.point, &g, aux.x_k(), aux.y_k(), tuning, config.floor_tol);
            // the gradient step no longer moves the iterate in floating point
            let stalled = !ok && {
                let moved = linalg::lin_comb(T::one(), s, -step, &e.form_gradient);
                at_rounding_level(&moved, s)
            };
            Ok(if ok || stalled {
                ControlFlow::Break(InnerSolution {
                    point: e.point,
                    grad_r_x: g.grad_r_x,
                    grad_r_y: g.grad_r_y,
                    aux_gx: g.gx,
                    aux_gy: g.gy,
                    iterations: it,
                    criterion_lhs: lhs,
                    criterion_rhs: rhs,
                    stalled,
                })
            } else {
                ControlFlow::Continue(e.form_gradient)
            })
        })?;
        let sol = found.ok_or(Error::InnerBudgetExhausted {
            outer_iteration,
            iterations: config.max_inner,
        })?;
        let mut rec = self.recorded.borrow_mut();
        if rec.len() < self.record_limit {
            rec.push(AuxSubproblem {
                outer_iteration,
                x_k: aux.x_k().to_vec(),
                y_k: aux.y_k().to_vec(),
                grad_p_g: aux.grad_p_g().to_vec(),
                grad_q_g: aux.grad_q_g().to_vec(),
                eta_x: aux.eta_x(),
                eta_y: aux.eta_y(),
                accepted: sol.point.clone(),
                iterations: sol.iterations,
            });
        }
        Ok(sol)
    }
}

/// Runs the sliding method on a bilinear problem with elimination + AGD inner
/// solves. `calls_grad_R` in the report counts `B` / `B^T` applications.
pub fn solve_bilinear<T: Scalar, BP: BilinearProblem<T>>(
    bp: BP,
    start: &PointPair<T>,
    config: &SolveConfig<T>,
) -> Result<ConvergenceReport<T>> {
    solve_bilinear_with(bp, start, config, &EliminationAgd::new())
}

pub fn solve_bilinear_with<T: Scalar, BP: BilinearProblem<T>>(
    bp: BP,
    start: &PointPair<T>,
    config: &SolveConfig<T>,
    inner: &EliminationAgd<T>,
) -> Result<ConvergenceReport<T>> {
    let (split, spec) = split_bilinear(bp)?;
    solve(&split, &spec, start, config, inner)
}

/// Extreme eigenvalues of the smaller Gram matrix of `B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GramSpectrum<T> {
    pub lambda_max: T,
    pub lambda_min: T,
    /// `B` / `B^T` applications spent; not part of any solver count.
    pub matvecs: u64,
}

/// Power iteration for the top and CG-based inverse iteration for the bottom
/// of the spectrum (100 iterations, relative tolerance `1e-6` each).
/// Estimates are widened by 1% to stay safe bounds.
pub fn estimate_gram_spectrum<T: Scalar, M: LinearMap<T> + ?Sized>(b: &M) -> GramSpectrum<T> {
    let (rows, cols) = (b.rows(), b.cols());
    let gram = |v: &[T]| -> Vec<T> {
        if rows <= cols {
            b.apply(&b.apply_transpose(v))
        } else {
            b.apply_transpose(&b.apply(v))
        }
    };
    let dim = rows.min(cols);
    let tol = T::lit(1e-6);
    let top = linalg::power_iteration(gram, dim, 100, tol);
    let bottom = linalg::inverse_iteration(gram, dim, 100, tol);
    GramSpectrum {
        lambda_max: top.value * T::lit(1.01),
        lambda_min: (bottom.value * T::lit(0.99)).max(T::zero()).min(top.value),
        matvecs: 2 * (top.applications + bottom.applications) as u64,
    }
}

/// Outcome of a regularized reduction.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSolution<T> {
    pub report: ConvergenceReport<T>,
    pub plan: RegularizationPlan<T>,
    /// Weighted-distance target handed to the solver.
    pub weighted_eps: T,
    pub spectrum: GramSpectrum<T>,
    /// `||B^T x - c||` for the affinely constrained reduction.
    pub constraint_residual: Option<T>,
}

fn reduction_config<T: Scalar>(base: &SolveConfig<T>, tuning: &SolverTuning<T>, target: T) -> SolveConfig<T> {
    // Unweighted target -> weighted: (1/eta)-weighted distance dominates
    // min(1/eta_x, 1/eta_y) times the plain one.
    let w = (T::one() / tuning.eta_x).min(T::one() / tuning.eta_y);
    let mut cfg = base.clone();
    cfg.eps = target * w;
    cfg.psi0 = Psi0Source::ResidualBound;
    cfg.known_solution = None;
    cfg.track_potential = false;
    cfg
}

fn resolve_spectrum<T: Scalar, M: LinearMap<T>>(b: &M, given: Option<GramSpectrum<T>>) -> GramSpectrum<T> {
    given.unwrap_or_else(|| estimate_gram_spectrum(b))
}

/// `min_x p(x) s.t. B^T x = c` through `min_x max_y p(x) + x^T B y - y^T c`
/// with `eps/(16 D_y^2)||y||^2` added to the dual composite.
///
/// `d_y` must bound the norm of the dual solution. Returns
/// [`Error::InfeasibleTarget`] when the final constraint residual exceeds
/// `sqrt(eps)(1 + ||c||)`.
#[allow(clippy::too_many_arguments)]
pub fn solve_affine_constrained<T, P, M>(
    p: P,
    l_p: T,
    mu_p: T,
    b: M,
    c: Vec<T>,
    d_y: T,
    eps: T,
    spectrum: Option<GramSpectrum<T>>,
    base: &SolveConfig<T>,
) -> Result<ReducedSolution<T>>
where
    T: Scalar,
    P: SmoothFunction<T>,
    M: LinearMap<T>,
{
    let plan = RegularizationPlan::affine_constrained(eps, d_y)?;
    let spectrum = resolve_spectrum(&b, spectrum);
    let two = T::lit(2.0);
    let mu_q = two * plan.coeff_y;
    let d_x = b.rows();
    let q = IsotropicQuadratic::new(c.clone(), plan.coeff_y);
    let constants = BilinearConstants {
        l_p,
        mu_p,
        l_q: mu_q,
        mu_q,
        lambda_max: spectrum.lambda_max,
        lambda_min: spectrum.lambda_min,
    };
    let inst = BilinearInstance::new(p, q, b, constants)?;
    let (split, spec) = split_bilinear(inst)?;
    let tuning = tune_parameters(&spec)?;
    let cfg = reduction_config(base, &tuning, plan.inner_target);
    let start = PointPair::zeros(d_x, c.len());
    let report = solve(&split, &spec, &start, &cfg, &EliminationAgd::new())?;
    let bt_x = split.inner().b.apply_transpose(&report.final_pair.x);
    let residual = linalg::dist_sq(&bt_x, &c).sqrt();
    let limit = eps.sqrt() * (T::one() + linalg::norm(&c));
    if !(residual <= limit) {
        return Err(Error::InfeasibleTarget {
            residual: residual.as_f64(),
            target: limit.as_f64(),
        });
    }
    Ok(ReducedSolution {
        report,
        plan,
        weighted_eps: cfg.eps,
        spectrum,
        constraint_residual: Some(residual),
    })
}

/// `min_x max_y x^T d + x^T B y - y^T c` with both blocks regularized by
/// `eps/(16 D^2)||.||^2`. `d_x_bound`, `d_y_bound` must bound the solution.
#[allow(clippy::too_many_arguments)]
pub fn solve_bilinear_linear_composites<T, M>(
    d: Vec<T>,
    c: Vec<T>,
    b: M,
    d_x_bound: T,
    d_y_bound: T,
    eps: T,
    spectrum: Option<GramSpectrum<T>>,
    base: &SolveConfig<T>,
) -> Result<ReducedSolution<T>>
where
    T: Scalar,
    M: LinearMap<T>,
{
    let plan = plan_cc(eps, d_x_bound, d_y_bound)?;
    let spectrum = resolve_spectrum(&b, spectrum);
    let two = T::lit(2.0);
    let (mu_p, mu_q) = (two * plan.coeff_x, two * plan.coeff_y);
    let (d_x, d_y) = (d.len(), c.len());
    let constants = BilinearConstants {
        l_p: mu_p,
        mu_p,
        l_q: mu_q,
        mu_q,
        lambda_max: spectrum.lambda_max,
        lambda_min: spectrum.lambda_min,
    };
    let inst = BilinearInstance::new(
        IsotropicQuadratic::new(d, plan.coeff_x),
        IsotropicQuadratic::new(c, plan.coeff_y),
        b,
        constants,
    )?;
    let (split, spec) = split_bilinear(inst)?;
    let tuning = tune_parameters(&spec)?;
    let cfg = reduction_config(base, &tuning, plan.inner_target);
    let report = solve(&split, &spec, &PointPair::zeros(d_x, d_y), &cfg, &EliminationAgd::new())?;
    Ok(ReducedSolution {
        report,
        plan,
        weighted_eps: cfg.eps,
        spectrum,
        constraint_residual: None,
    })
}
