mod common;

use common::{central_diff, gaussian, kkt, rel_err, to_dense, to_vec, with_singular_values, with_spectrum};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saddle_core::problem::{BilinearCoupling, CompositeProblem, Quadratic};
use saddle_core::regularization::{apply_plan, plan_cc, plan_scc, solve_regularized, RegularizationPlan};
use saddle_core::{tune_parameters, wrap_counting, CompositeSaddle, Config, Point, Spec};

/// Point of norm at most `bound`.
fn inside_ball(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> DVector<f64> {
    let v = DVector::from_vec(gaussian(rng, n));
    let r = bound * rng.random_range(0.1..1.0);
    v.normalize() * r
}

struct Data {
    p: nalgebra::DMatrix<f64>,
    q: nalgebra::DMatrix<f64>,
    b: nalgebra::DMatrix<f64>,
    a: DVector<f64>,
    c: DVector<f64>,
}

struct Case {
    problem: saddle_core::QuadraticSaddle,
    spec: Spec,
    solution: Point,
    data: Data,
}

/// Convex-concave (or strongly-convex-concave when `mu_x > 0`) quadratic
/// problem with a saddle inside the given balls.
fn case(rng: &mut ChaCha8Rng, d: usize, mu_x: f64, d_x: f64, d_y: f64) -> Case {
    // rank-deficient composites: the last eigenvalue is zero
    let mut ep: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0)).collect();
    ep[d - 1] = 0.0;
    let mut eq: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0)).collect();
    eq[d - 1] = 0.0;
    let p = with_spectrum(rng, &ep);
    let q = with_spectrum(rng, &eq);
    let sv: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
    let b = with_singular_values(rng, d, d, &sv);
    let x_star = inside_ball(rng, d, d_x);
    let y_star = inside_ball(rng, d, d_y);
    let a = -(&p * &x_star + &x_star * mu_x + &b * &y_star);
    let c = b.transpose() * &x_star - &q * &y_star;
    let solution = kkt(&p, &q, &b, mu_x, 0.0, &a, &c);
    let l_r = mu_x + sv.iter().cloned().fold(0.0, f64::max);
    Case {
        problem: CompositeProblem::new(
            Quadratic::new(to_dense(&p), to_vec(&a)).unwrap(),
            Quadratic::new(to_dense(&q), to_vec(&c)).unwrap(),
            BilinearCoupling::new(to_dense(&b), mu_x, 0.0),
        )
        .unwrap(),
        spec: Spec::new(2.0, 2.0, l_r, mu_x, 0.0),
        solution,
        data: Data { p, q, b, a, c },
    }
}

fn sq_dist(a: &Point, b: &Point) -> f64 {
    a.x.iter()
        .zip(&b.x)
        .chain(a.y.iter().zip(&b.y))
        .map(|(p, q)| (p - q).powi(2))
        .sum()
}

/// Every point within `inner_target` of the regularized saddle is within
/// `eps` of the original one. Checks random points on the boundary sphere
/// and the direction pointing away from the original saddle.
fn check_ball(rng: &mut ChaCha8Rng, plan: &RegularizationPlan<f64>, c: &Case, eps: f64) {
    let m = &c.data;
    let reg = kkt(
        &m.p,
        &m.q,
        &m.b,
        c.spec.mu_x + 2.0 * plan.coeff_x,
        2.0 * plan.coeff_y,
        &m.a,
        &m.c,
    );
    let r = plan.inner_target.sqrt();
    let d = reg.x.len();
    let away: Vec<f64> = reg
        .x
        .iter()
        .zip(&c.solution.x)
        .chain(reg.y.iter().zip(&c.solution.y))
        .map(|(a, b)| a - b)
        .collect();
    let mut dirs = vec![away];
    for _ in 0..20 {
        dirs.push(gaussian(rng, 2 * d));
    }
    for dir in dirs {
        let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            continue;
        }
        let z = Point::new(
            (0..d).map(|i| reg.x[i] + r * dir[i] / n).collect(),
            (0..d).map(|i| reg.y[i] + r * dir[d + i] / n).collect(),
        );
        let dist = sq_dist(&z, &c.solution);
        assert!(dist <= eps, "squared distance {dist} > {eps}");
    }
}

fn check_solver(plan: &RegularizationPlan<f64>, c: &Case, eps: f64) {
    let counted = wrap_counting(&c.problem);
    let d = c.solution.x.len();
    let report = solve_regularized(&counted, &c.spec, plan, &Point::zeros(d, d), &Config::new(eps)).unwrap();
    let dist = sq_dist(&report.final_pair, &c.solution);
    assert!(dist <= eps, "squared distance {dist} > {eps}");
}

#[test]
fn strongly_convex_concave_ball_maps_into_eps() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for eps in [1e-2, 1e-3] {
        for _ in 0..200 {
            let (dx, dy) = (1.5, 2.0);
            let c = case(&mut rng, 3, 0.5, dx, dy);
            check_ball(&mut rng, &plan_scc(eps, dy).unwrap(), &c, eps);
        }
    }
}

#[test]
fn convex_concave_ball_maps_into_eps() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for eps in [1e-2, 1e-3] {
        for _ in 0..200 {
            let (dx, dy) = (1.0, 2.5);
            let c = case(&mut rng, 3, 0.0, dx, dy);
            check_ball(&mut rng, &plan_cc(eps, dx, dy).unwrap(), &c, eps);
        }
    }
}

#[test]
fn reductions_solved_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let eps = 1e-2;
    for _ in 0..3 {
        let c = case(&mut rng, 3, 0.5, 1.5, 2.0);
        check_solver(&plan_scc(eps, 2.0).unwrap(), &c, eps);
        let c = case(&mut rng, 3, 0.0, 1.0, 2.5);
        check_solver(&plan_cc(eps, 1.0, 2.5).unwrap(), &c, eps);
    }
}

#[test]
fn regularized_gradient_adds_plan_terms() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = case(&mut rng, 4, 0.0, 1.0, 1.0);
    let plan = plan_cc(0.3, 0.7, 1.3).unwrap();
    let (reg, _) = apply_plan(&c.problem, &c.spec, &plan).unwrap();
    for _ in 0..100 {
        let x = gaussian(&mut rng, 4);
        let y = gaussian(&mut rng, 4);
        let (gx, gy) = reg.grad_r(&x, &y);
        let (ox, oy) = c.problem.grad_r(&x, &y);
        for i in 0..4 {
            assert!((gx[i] - (ox[i] + 2.0 * plan.coeff_x * x[i])).abs() <= 1e-14);
            assert!((gy[i] - (oy[i] - 2.0 * plan.coeff_y * y[i])).abs() <= 1e-14);
        }
        let dx = gaussian(&mut rng, 4);
        let fd = central_diff(|z| reg.value_r(z, &y).unwrap(), &x, &dx, 1e-5);
        let an: f64 = gx.iter().zip(&dx).map(|(g, d)| g * d).sum();
        assert!(rel_err(fd, an) <= 1e-5, "{fd} vs {an}");
        let dy = gaussian(&mut rng, 4);
        let fd = central_diff(|z| reg.value_r(&x, z).unwrap(), &y, &dy, 1e-5);
        let an: f64 = gy.iter().zip(&dy).map(|(g, d)| g * d).sum();
        assert!(rel_err(fd, an) <= 1e-5, "{fd} vs {an}");
    }
}

proptest! {
    #[test]
    fn post_plan_spec_always_tunes(
        eps in 1e-8f64..10.0,
        d_x in 1e-3f64..1e3,
        d_y in 1e-3f64..1e3,
        l_r in 1e-3f64..1e3,
        mu_x in 0.0f64..1.0,
    ) {
        let problem = CompositeProblem::new(
            Quadratic::<f64>::zero(1),
            Quadratic::<f64>::zero(1),
            BilinearCoupling::new(saddle_core::Matrix::identity(1), 0.0, 0.0),
        ).unwrap();
        let spec = Spec::new(1.0, 1.0, l_r, 0.0, 0.0);
        let (_, s) = apply_plan(&problem, &spec, &plan_cc(eps, d_x, d_y).unwrap()).unwrap();
        prop_assert!(tune_parameters(&s).is_ok());
        let spec = Spec::new(1.0, 1.0, l_r.max(mu_x), mu_x, 0.0);
        let scc = plan_scc(eps, d_y).unwrap();
        match apply_plan(&problem, &spec, &scc) {
            Ok((_, s)) => prop_assert!(tune_parameters(&s).is_ok()),
            Err(_) => prop_assert!(mu_x == 0.0),
        }
    }
}
