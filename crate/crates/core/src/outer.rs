//! The accelerated sliding outer loop: tuning, iteration budget, acceptance
//! test for auxiliary solutions and potential diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner::{AuxiliaryProblem, AuxiliarySolver, Extragradient, InnerConfig};
use crate::linalg;
use crate::problem::{
    bregman, check_len, dist_sq_pair, saddle_operator, validate_spec, weighted_distance_sq, CompositeSaddle,
    CountedOracles, OracleCounters, PointPair, SmoothnessSpec,
};
use crate::scalar::Scalar;

/// Which composite's condition number drives the tuning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    XDominant,
    YDominant,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverTuning<T> {
    pub alpha: T,
    pub eta_x: T,
    pub eta_y: T,
    pub branch: Branch,
}

pub fn tune_parameters<T: Scalar>(spec: &SmoothnessSpec<T>) -> Result<SolverTuning<T>> {
    validate_spec(spec)?;
    let one = T::one();
    let three = T::lit(3.0);
    // L = 0 gives an infinite ratio, hence alpha = 1 and the 1/(3 mu) step.
    let tune = |l: T, mu: T| {
        let alpha = (mu / l).sqrt().min(one);
        let eta = (one / (three * mu)).min(one / (three * l * alpha));
        (alpha, eta)
    };
    if spec.l_p / spec.mu_x >= spec.l_q / spec.mu_y {
        let (alpha, eta_x) = tune(spec.l_p, spec.mu_x);
        Ok(SolverTuning {
            alpha,
            eta_x,
            eta_y: spec.mu_x / spec.mu_y * eta_x,
            branch: Branch::XDominant,
        })
    } else {
        let (alpha, eta_y) = tune(spec.l_q, spec.mu_y);
        Ok(SolverTuning {
            alpha,
            eta_x: spec.mu_y / spec.mu_x * eta_y,
            eta_y,
            branch: Branch::YDominant,
        })
    }
}

/// `ceil(3 max{1, sqrt(L_p/mu_x), sqrt(L_q/mu_y)} ln(psi_0/eps))`, at least 1.
pub fn required_outer_iterations<T: Scalar>(spec: &SmoothnessSpec<T>, psi_0: T, eps: T) -> Result<usize> {
    if !(psi_0 > T::zero()) {
        return Err(Error::NonPositiveInput {
            name: "psi_0",
            value: psi_0.as_f64(),
        });
    }
    if !(eps > T::zero()) {
        return Err(Error::NonPositiveInput {
            name: "eps",
            value: eps.as_f64(),
        });
    }
    let kappa = 1f64
        .max((spec.l_p / spec.mu_x).as_f64().sqrt())
        .max((spec.l_q / spec.mu_y).as_f64().sqrt());
    let log = (psi_0.as_f64() / eps.as_f64()).ln();
    if !(log > 0.0) {
        return Ok(1);
    }
    // shave rounding noise so that e.g. 3 ln(e^2) does not round up to 7
    let k = (3.0 * kappa * log * (1.0 - 8.0 * f64::EPSILON)).ceil();
    Ok(if k.is_finite() { (k as usize).max(1) } else { usize::MAX })
}

/// Both sides of the acceptance test:
/// `eta_x ||g_x||^2 + eta_y ||g_y||^2` and `||dx||^2/(6 eta_x) + ||dy||^2/(6 eta_y)`.
pub fn criterion_sides<T: Scalar>(g_x: &[T], g_y: &[T], dx: &[T], dy: &[T], tuning: &SolverTuning<T>) -> (T, T) {
    let six = T::lit(6.0);
    let lhs = tuning.eta_x * linalg::norm_sq(g_x) + tuning.eta_y * linalg::norm_sq(g_y);
    let rhs = linalg::norm_sq(dx) / (six * tuning.eta_x) + linalg::norm_sq(dy) / (six * tuning.eta_y);
    (lhs, rhs)
}

pub fn check_inner_criterion<T: Scalar>(
    g_x: &[T],
    g_y: &[T],
    dx: &[T],
    dy: &[T],
    tuning: &SolverTuning<T>,
    floor_tol: T,
) -> Result<bool> {
    check_len(g_y, dy.len())?;
    check_len(g_x, dx.len())?;
    let (lhs, rhs) = criterion_sides(g_x, g_y, dx, dy, tuning);
    Ok(lhs <= rhs || lhs <= floor_tol)
}

/// Iterates of the outer loop: `z = (x^k, y^k)`, `z_f = (x_f^k, y_f^k)` and
/// the composite gradients at the current extrapolation point.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterState<T> {
    pub k: usize,
    pub z: PointPair<T>,
    pub z_f: PointPair<T>,
    pub grad_p_g: Vec<T>,
    pub grad_q_g: Vec<T>,
}

impl<T: Scalar> OuterState<T> {
    pub fn new(start: PointPair<T>) -> Self {
        Self {
            k: 0,
            z_f: start.clone(),
            z: start,
            grad_p_g: Vec::new(),
            grad_q_g: Vec::new(),
        }
    }

    /// `alpha z + (1 - alpha) z_f`; exactly `z` when `alpha = 1`.
    pub fn extrapolate(&self, alpha: T) -> PointPair<T> {
        if alpha == T::one() {
            return self.z.clone();
        }
        let b = T::one() - alpha;
        PointPair::new(
            linalg::lin_comb(alpha, &self.z.x, b, &self.z_f.x),
            linalg::lin_comb(alpha, &self.z.y, b, &self.z_f.y),
        )
    }
}

/// `z_g + alpha (z_hat - z)`; exactly `z_hat` when `alpha = 1`.
pub fn momentum_point<T: Scalar>(z_g: &PointPair<T>, z_hat: &PointPair<T>, z: &PointPair<T>, alpha: T) -> PointPair<T> {
    if alpha == T::one() {
        return z_hat.clone();
    }
    let step = |g: &[T], h: &[T], c: &[T]| -> Vec<T> {
        g.iter()
            .zip(h.iter().zip(c))
            .map(|(&g, (&h, &c))| g + alpha * (h - c))
            .collect()
    };
    PointPair::new(step(&z_g.x, &z_hat.x, &z.x), step(&z_g.y, &z_hat.y, &z.y))
}

/// Where the initial potential bound comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psi0Source<T> {
    /// Caller-supplied upper bound.
    Supplied(T),
    /// Exact value when a known solution and value oracles are present,
    /// otherwise no bound.
    Auto,
    /// Bound from the saddle operator at the start point and strong
    /// monotonicity; costs one call of each oracle.
    ResidualBound,
    /// Run `max_outer` iterations, uncertified.
    MaxOuterOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig<T> {
    /// Target for the weighted squared distance.
    pub eps: T,
    pub max_outer: usize,
    pub inner: InnerConfig<T>,
    /// Record the potential each step; needs `known_solution` and value oracles.
    pub track_potential: bool,
    pub known_solution: Option<PointPair<T>>,
    pub psi0: Psi0Source<T>,
    /// Stop once the saddle-operator residual certifies `eps`. Costs one extra
    /// `grad_p` and `grad_q` call per outer step.
    pub residual_stop: bool,
    /// Keep the vectors the acceptance test saw.
    pub log_inner_vectors: bool,
}

impl<T: Scalar> SolveConfig<T> {
    pub fn new(eps: T) -> Self {
        Self {
            eps,
            max_outer: 100_000,
            inner: InnerConfig::default(),
            track_potential: false,
            known_solution: None,
            psi0: Psi0Source::Auto,
            residual_stop: false,
            log_inner_vectors: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > T::zero()) {
            return Err(Error::NonPositiveInput {
                name: "eps",
                value: self.eps.as_f64(),
            });
        }
        if self.max_outer == 0 {
            return Err(Error::NonPositiveInput {
                name: "max_outer",
                value: 0.0,
            });
        }
        if let Psi0Source::Supplied(v) = self.psi0 {
            if !(v > T::zero()) {
                return Err(Error::NonPositiveInput {
                    name: "psi_0",
                    value: v.as_f64(),
                });
            }
        }
        self.inner.validate()
    }
}

/// Vectors the acceptance test was evaluated on.
#[derive(Clone, Debug, PartialEq)]
pub struct AcceptanceLog<T> {
    pub g_x: Vec<T>,
    pub g_y: Vec<T>,
    pub dx: Vec<T>,
    pub dy: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord<T> {
    /// Index of the iterate produced, `k + 1`.
    pub k: usize,
    pub inner_iterations: usize,
    pub grad_r_calls: u64,
    pub weighted_dist_sq: Option<T>,
    pub dist_sq: Option<T>,
    pub potential: Option<T>,
    pub criterion_lhs: T,
    pub criterion_rhs: T,
    /// The auxiliary solve stopped at a floating-point fixed point.
    pub inner_stalled: bool,
    pub acceptance: Option<AcceptanceLog<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "reason")]
pub enum Termination {
    /// Ran the planned number of outer steps. `certified` is true when that
    /// number came from a valid initial-potential bound.
    Budget {
        certified: bool,
    },
    ResidualMet,
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Budget { certified: true } => "budget-certified",
            Termination::Budget { certified: false } => "budget-uncertified",
            Termination::ResidualMet => "residual-met",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport<T> {
    pub final_pair: PointPair<T>,
    /// Calls made by the iteration itself.
    pub counters: OracleCounters,
    /// Calls spent on the initial bound and potential bookkeeping.
    pub setup_counters: OracleCounters,
    pub records: Vec<IterationRecord<T>>,
    pub termination: Termination,
    pub outer_budget: usize,
    pub psi0: Option<T>,
    /// Potential at the start point when it was tracked.
    pub initial_potential: Option<T>,
    pub tuning: SolverTuning<T>,
}

/// `(1/eta_x)||x - x*||^2 + (1/eta_y)||y - y*||^2 + (2/alpha)(D_p(x_f, x*) + D_q(y_f, y*))`.
///
/// Calls `grad_p(x*)` and `grad_q(y*)` once each.
pub fn compute_potential<T: Scalar, P: CompositeSaddle<T> + ?Sized>(
    problem: &P,
    tuning: &SolverTuning<T>,
    state: &OuterState<T>,
    solution: &PointPair<T>,
) -> Result<T> {
    let gp = problem.grad_p(&solution.x);
    let gq = problem.grad_q(&solution.y);
    potential_with(problem, tuning, &state.z, &state.z_f, solution, &gp, &gq)
}

fn potential_with<T: Scalar, P: CompositeSaddle<T> + ?Sized>(
    problem: &P,
    tuning: &SolverTuning<T>,
    z: &PointPair<T>,
    z_f: &PointPair<T>,
    solution: &PointPair<T>,
    grad_p_star: &[T],
    grad_q_star: &[T],
) -> Result<T> {
    let dist = weighted_distance_sq(z, solution, tuning.eta_x, tuning.eta_y)?;
    let dp = bregman(
        |x: &[T]| problem.value_p(x),
        |_: &[T]| grad_p_star.to_vec(),
        &z_f.x,
        &solution.x,
    )
    .map_err(|e| rename_missing(e, "value_p"))?;
    let dq = bregman(
        |y: &[T]| problem.value_q(y),
        |_: &[T]| grad_q_star.to_vec(),
        &z_f.y,
        &solution.y,
    )
    .map_err(|e| rename_missing(e, "value_q"))?;
    Ok(dist + T::lit(2.0) / tuning.alpha * (dp + dq))
}

fn rename_missing(e: Error, name: &'static str) -> Error {
    match e {
        Error::MissingValueOracle(_) => Error::MissingValueOracle(name),
        other => other,
    }
}

/// Potential bound at `start` from `||z0 - z*|| <= ||F(z0)|| / min(mu_x, mu_y)`
/// and `D_p <= (L_p/2)||.||^2`. One call of each oracle.
pub fn psi0_upper_bound<T: Scalar, P: CompositeSaddle<T> + ?Sized>(
    problem: &P,
    spec: &SmoothnessSpec<T>,
    tuning: &SolverTuning<T>,
    start: &PointPair<T>,
) -> T {
    let f = saddle_operator(problem, start);
    let mu = spec.mu_x.min(spec.mu_y);
    let r2 = (linalg::norm_sq(&f.x) + linalg::norm_sq(&f.y)) / (mu * mu);
    let wx = T::one() / tuning.eta_x + spec.l_p / tuning.alpha;
    let wy = T::one() / tuning.eta_y + spec.l_q / tuning.alpha;
    wx.max(wy) * r2
}

fn has_value_oracles<T: Scalar, P: CompositeSaddle<T> + ?Sized>(problem: &P, z: &PointPair<T>) -> bool {
    problem.value_p(&z.x).is_some() && problem.value_q(&z.y).is_some()
}

/// Runs the accelerated sliding method with the given auxiliary solver.
pub fn solve<T, P, S>(
    problem: &P,
    spec: &SmoothnessSpec<T>,
    start: &PointPair<T>,
    config: &SolveConfig<T>,
    inner: &S,
) -> Result<ConvergenceReport<T>>
where
    T: Scalar,
    P: CompositeSaddle<T> + CountedOracles + ?Sized,
    S: AuxiliarySolver<T, P> + ?Sized,
{
    let tuning = tune_parameters(spec)?;
    config.validate()?;
    let (d_x, d_y) = (problem.dim_x(), problem.dim_y());
    start.check_dims(d_x, d_y)?;
    if !start.is_finite() {
        return Err(Error::NonFiniteIterate { iteration: 0 });
    }
    if let Some(sol) = &config.known_solution {
        sol.check_dims(d_x, d_y)?;
    }

    let before_setup = problem.counters();

    let potential_cache = if config.track_potential {
        let sol = config
            .known_solution
            .as_ref()
            .ok_or(Error::MissingKnownSolution("track_potential"))?;
        if !has_value_oracles(problem, sol) {
            return Err(Error::MissingValueOracle("track_potential"));
        }
        Some((problem.grad_p(&sol.x), problem.grad_q(&sol.y)))
    } else {
        None
    };

    let exact_psi0 = |cache: Option<&(Vec<T>, Vec<T>)>| -> Result<Option<T>> {
        let Some(sol) = &config.known_solution else {
            return Ok(None);
        };
        if !has_value_oracles(problem, sol) {
            return Ok(None);
        }
        let (gp, gq) = match cache {
            Some((gp, gq)) => (gp.clone(), gq.clone()),
            None => (problem.grad_p(&sol.x), problem.grad_q(&sol.y)),
        };
        potential_with(problem, &tuning, start, start, sol, &gp, &gq).map(Some)
    };

    let psi0 = match config.psi0 {
        Psi0Source::Supplied(v) => Some(v),
        Psi0Source::Auto => exact_psi0(potential_cache.as_ref())?,
        Psi0Source::ResidualBound => Some(psi0_upper_bound(problem, spec, &tuning, start)),
        Psi0Source::MaxOuterOnly => None,
    };
    let initial_potential = match &potential_cache {
        Some(_) if matches!(config.psi0, Psi0Source::Auto) => psi0,
        Some(_) => exact_psi0(potential_cache.as_ref())?,
        None => None,
    };

    let (outer_budget, certified) = match psi0 {
        // an exact zero potential means the start is the solution
        Some(v) if v <= T::zero() => (1.min(config.max_outer), true),
        Some(v) => {
            let k = required_outer_iterations(spec, v, config.eps)?;
            (k.min(config.max_outer), k <= config.max_outer)
        }
        None => (config.max_outer, false),
    };

    let after_setup = problem.counters();
    let setup_counters = after_setup.since(&before_setup);

    let dist0 = config
        .known_solution
        .as_ref()
        .map(|s| weighted_distance_sq(start, s, tuning.eta_x, tuning.eta_y))
        .transpose()?;
    let guard_floor = dist0.map(|d| d * T::epsilon().sqrt());

    let alpha = tuning.alpha;
    let mu_min = spec.mu_x.min(spec.mu_y);
    let residual_target = mu_min * mu_min * config.eps / T::lit(4.0);

    let mut state = OuterState::new(start.clone());
    let mut records: Vec<IterationRecord<T>> = Vec::with_capacity(outer_budget.min(1 << 16));
    let mut inner_total: u64 = 0;
    let mut termination = Termination::Budget { certified };
    let mut final_pair = None;

    for k in 0..outer_budget {
        let z_g = state.extrapolate(alpha);
        state.grad_p_g = problem.grad_p(&z_g.x);
        state.grad_q_g = problem.grad_q(&z_g.y);
        check_len(&state.grad_p_g, d_x)?;
        check_len(&state.grad_q_g, d_y)?;

        let r_before = problem.counters().grad_r;
        let sol = {
            let aux = AuxiliaryProblem::build(problem, &state, &tuning)?;
            inner.solve_aux(&aux, spec, &tuning, &config.inner, k)?
        };
        let grad_r_calls = problem.counters().grad_r - r_before;
        inner_total += sol.iterations as u64;

        let x_next: Vec<T> = (state.z.x.iter().zip(&state.grad_p_g).zip(&sol.grad_r_x))
            .map(|((&x, &gp), &rx)| x - tuning.eta_x * (gp + rx))
            .collect();
        let y_next: Vec<T> = (state.z.y.iter().zip(&state.grad_q_g).zip(&sol.grad_r_y))
            .map(|((&y, &gq), &ry)| y - tuning.eta_y * (gq - ry))
            .collect();
        let z_f_next = momentum_point(&z_g, &sol.point, &state.z, alpha);
        let z_next = PointPair::new(x_next, y_next);
        if !z_next.is_finite() || !z_f_next.is_finite() {
            return Err(Error::NonFiniteIterate { iteration: k + 1 });
        }

        let acceptance = config.log_inner_vectors.then(|| AcceptanceLog {
            g_x: sol.aux_gx.clone(),
            g_y: sol.aux_gy.clone(),
            dx: linalg::sub(&sol.point.x, &state.z.x),
            dy: linalg::sub(&sol.point.y, &state.z.y),
        });

        state.z = z_next;
        state.z_f = z_f_next;
        state.k = k + 1;

        let (weighted, plain) = match &config.known_solution {
            Some(s) => (
                Some(weighted_distance_sq(&state.z, s, tuning.eta_x, tuning.eta_y)?),
                Some(dist_sq_pair(&state.z, s)?),
            ),
            None => (None, None),
        };
        let potential = match (&potential_cache, &config.known_solution) {
            (Some((gp, gq)), Some(s)) => Some(potential_with(problem, &tuning, &state.z, &state.z_f, s, gp, gq)?),
            _ => None,
        };

        records.push(IterationRecord {
            k: k + 1,
            inner_iterations: sol.iterations,
            grad_r_calls,
            weighted_dist_sq: weighted,
            dist_sq: plain,
            potential,
            criterion_lhs: sol.criterion_lhs,
            criterion_rhs: sol.criterion_rhs,
            inner_stalled: sol.stalled,
            acceptance,
        });

        if let (Some(w), Some(floor)) = (weighted, guard_floor) {
            if k + 1 >= 10 {
                let earlier = if k + 1 == 10 {
                    dist0.unwrap()
                } else {
                    records[k - 10].weighted_dist_sq.unwrap()
                };
                if w >= T::lit(10.0) * earlier && w > floor {
                    return Err(Error::Diverged {
                        iteration: k + 1,
                        distance: w.as_f64(),
                    });
                }
            }
        }

        if config.residual_stop {
            let gp = problem.grad_p(&sol.point.x);
            let gq = problem.grad_q(&sol.point.y);
            let fx = linalg::add(&gp, &sol.grad_r_x);
            let fy = linalg::sub(&gq, &sol.grad_r_y);
            if linalg::norm_sq(&fx) + linalg::norm_sq(&fy) <= residual_target {
                termination = Termination::ResidualMet;
                final_pair = Some(sol.point);
                break;
            }
        }
    }

    let mut counters = problem.counters().since(&after_setup);
    counters.outer_iterations = records.len() as u64;
    counters.inner_iterations = inner_total;

    Ok(ConvergenceReport {
        final_pair: final_pair.unwrap_or(state.z),
        counters,
        setup_counters,
        records,
        termination,
        outer_budget,
        psi0,
        initial_potential,
        tuning,
    })
}

/// [`solve`] with the default extragradient auxiliary solver.
pub fn solve_sliding<T, P>(
    problem: &P,
    spec: &SmoothnessSpec<T>,
    start: &PointPair<T>,
    config: &SolveConfig<T>,
) -> Result<ConvergenceReport<T>>
where
    T: Scalar,
    P: CompositeSaddle<T> + CountedOracles + ?Sized,
{
    solve(problem, spec, start, config, &Extragradient)
}
