mod common;

use common::{central_diff, gaussian, kkt, quad_instance, rel_err, QuadInstance};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saddle_core::inner::{scaled_aux_smoothness, AuxiliaryProblem};
use saddle_core::problem::{CompositeProblem, FnCoupling, Quadratic};
use saddle_core::{
    check_inner_criterion, compute_rescaling, tune_parameters, wrap_counting, AuxiliarySolver, CompositeSaddle,
    CountedOracles, Extragradient, InnerConfig, OuterState, Point, Rescaling, Tuning,
};

fn random_state(rng: &mut ChaCha8Rng, dx: usize, dy: usize) -> OuterState<f64> {
    let mut s = OuterState::new(Point::new(gaussian(rng, dx), gaussian(rng, dy)));
    s.grad_p_g = gaussian(rng, dx);
    s.grad_q_g = gaussian(rng, dy);
    s
}

/// Exact saddle of the auxiliary problem by a dense solve.
fn aux_solution(inst: &QuadInstance, state: &OuterState<f64>, t: &Tuning) -> Point {
    let (dx, dy) = (inst.p.nrows(), inst.q.nrows());
    let px = DMatrix::identity(dx, dx) / t.eta_x;
    let qy = DMatrix::identity(dy, dy) / t.eta_y;
    let a = DVector::from_vec(state.grad_p_g.clone()) - DVector::from_vec(state.z.x.clone()) / t.eta_x;
    let c = DVector::from_vec(state.grad_q_g.clone()) - DVector::from_vec(state.z.y.clone()) / t.eta_y;
    kkt(&px, &qy, &inst.b, inst.spec.mu_x, inst.spec.mu_y, &a, &c)
}

fn scaled_dist(resc: &Rescaling<f64>, a: &Point, b: &Point) -> f64 {
    let (wa, wb) = (resc.to_scaled(a), resc.to_scaled(b));
    wa.x.iter()
        .zip(&wb.x)
        .chain(wa.y.iter().zip(&wb.y))
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Plain extragradient on the auxiliary operator in the coordinates given by
/// `resc`, with step `step`; returns all iterates in original coordinates.
fn eg_iterates<P: CompositeSaddle<f64>>(
    aux: &AuxiliaryProblem<'_, f64, P>,
    resc: &Rescaling<f64>,
    step: f64,
    n: usize,
) -> Vec<Point> {
    let (a, b) = (resc.alpha_scale, resc.beta_scale);
    let mut w = resc.to_scaled(&aux.start());
    let mut out = vec![aux.start()];
    for _ in 0..n {
        let z = resc.to_original(&w);
        let g = aux.gradient(&z.x, &z.y);
        let mut wh = w.clone();
        wh.x.iter_mut().zip(&g.gx).for_each(|(v, g)| *v -= step * a * g);
        wh.y.iter_mut().zip(&g.gy).for_each(|(v, g)| *v += step * b * g);
        let zh = resc.to_original(&wh);
        let gh = aux.gradient(&zh.x, &zh.y);
        w.x.iter_mut().zip(&gh.gx).for_each(|(v, g)| *v -= step * a * g);
        w.y.iter_mut().zip(&gh.gy).for_each(|(v, g)| *v += step * b * g);
        out.push(resc.to_original(&w));
    }
    out
}

#[test]
fn aux_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inst = quad_instance(&mut rng, 3, 4, 2.0, 2.0, 5.0, 1.0, 0.5);
    let t = tune_parameters(&inst.spec).unwrap();
    for _ in 0..100 {
        let state = random_state(&mut rng, 3, 4);
        let aux = AuxiliaryProblem::build(&inst.problem, &state, &t).unwrap();
        let x = gaussian(&mut rng, 3);
        let y = gaussian(&mut rng, 4);
        let g = aux.gradient(&x, &y);
        let dx = gaussian(&mut rng, 3);
        let dy = gaussian(&mut rng, 4);
        let fd = central_diff(|z| aux.value(z, &y).unwrap(), &x, &dx, 1e-5);
        let an: f64 = g.gx.iter().zip(&dx).map(|(g, d)| g * d).sum();
        assert!(rel_err(fd, an) <= 1e-6, "x block: {fd} vs {an}");
        let fd = central_diff(|z| aux.value(&x, z).unwrap(), &y, &dy, 1e-5);
        let an: f64 = g.gy.iter().zip(&dy).map(|(g, d)| g * d).sum();
        assert!(rel_err(fd, an) <= 1e-6, "y block: {fd} vs {an}");
    }
}

#[test]
fn aux_gradient_identity_example() {
    let problem = CompositeProblem::new(
        Quadratic::zero(1),
        Quadratic::zero(1),
        FnCoupling::new(1, 1, |x: &[f64], y: &[f64]| (vec![y[0]], vec![x[0]])),
    )
    .unwrap();
    let mut state = OuterState::new(Point::zeros(1, 1));
    state.grad_p_g = vec![2.0];
    state.grad_q_g = vec![0.0];
    let t = Tuning {
        alpha: 1.0,
        eta_x: 1.0,
        eta_y: 1.0,
        branch: saddle_core::Branch::XDominant,
    };
    let aux = AuxiliaryProblem::build(&problem, &state, &t).unwrap();
    assert_eq!(aux.gradient(&[1.0], &[3.0]).gx, vec![6.0]);
}

#[test]
fn rescaled_and_unscaled_runs_reach_the_same_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..10 {
        let mu_y = if trial % 2 == 0 { 0.05 } else { 5.0 };
        let inst = quad_instance(&mut rng, 3, 3, 30.0, 1.0, 6.0, 1.0, mu_y);
        let t = tune_parameters(&inst.spec).unwrap();
        let resc = compute_rescaling(&t).unwrap();
        assert!(resc.alpha_scale != resc.beta_scale);
        let state = random_state(&mut rng, 3, 3);
        let aux = AuxiliaryProblem::build(&inst.problem, &state, &t).unwrap();
        let exact = aux_solution(&inst, &state, &t);

        let step_scaled = 1.0 / (2.0 * scaled_aux_smoothness(&inst.spec, &t, &resc));
        let id = Rescaling::identity();
        let step_plain = 1.0 / (2.0 * scaled_aux_smoothness(&inst.spec, &t, &id));
        let scaled = eg_iterates(&aux, &resc, step_scaled, 4000).pop().unwrap();
        let plain = eg_iterates(&aux, &id, step_plain, 4000).pop().unwrap();
        let gap: f64 = scaled
            .x
            .iter()
            .zip(&plain.x)
            .chain(scaled.y.iter().zip(&plain.y))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap <= 1e-10, "trial {trial}: scaled and unscaled differ by {gap}");
        let err: f64 = scaled_dist(&id, &scaled, &exact);
        assert!(err <= 1e-10, "trial {trial}: distance to exact {err}");
        // round trip of the change of variables itself
        let back = resc.to_original(&resc.to_scaled(&exact));
        assert!(scaled_dist(&id, &back, &exact) <= 1e-12);
    }
}

#[test]
fn rescaled_operator_obeys_scaled_constant_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let (dx, dy) = (rng.random_range(1..5), rng.random_range(1..5));
        let inst = quad_instance(&mut rng, dx, dy, 1.0, 1.0, 4.0, 0.3, 2.0);
        let n = dx + dy;
        // Jacobian of z -> (grad_x R, -grad_y R)
        let mut j = DMatrix::zeros(n, n);
        j.view_mut((0, 0), (dx, dx)).fill_with_identity();
        j.view_mut((0, 0), (dx, dx)).scale_mut(inst.spec.mu_x);
        j.view_mut((0, dx), (dx, dy)).copy_from(&inst.b);
        j.view_mut((dx, 0), (dy, dx)).copy_from(&(-inst.b.transpose()));
        j.view_mut((dx, dx), (dy, dy)).fill_with_identity();
        j.view_mut((dx, dx), (dy, dy)).scale_mut(inst.spec.mu_y);
        let l_unscaled = j.clone().svd(false, false).singular_values.max();

        let a = rng.random_range(0.5..3.0);
        let resc = Rescaling {
            alpha_scale: a,
            beta_scale: 1.0,
        };
        let factor = resc.smoothness_factor();
        let op = |u: &[f64], v: &[f64]| {
            let x: Vec<f64> = u.iter().map(|u| a * u).collect();
            let (gx, gy) = inst.problem.grad_r(&x, v);
            let mut out: Vec<f64> = gx.iter().map(|g| a * g).collect();
            out.extend(gy.iter().map(|g| -g));
            out
        };
        for _ in 0..100 {
            let (u1, v1) = (gaussian(&mut rng, dx), gaussian(&mut rng, dy));
            let (u2, v2) = (gaussian(&mut rng, dx), gaussian(&mut rng, dy));
            let f1 = op(&u1, &v1);
            let f2 = op(&u2, &v2);
            let num: f64 = f1.iter().zip(&f2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den: f64 = u1
                .iter()
                .zip(&u2)
                .chain(v1.iter().zip(&v2))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(num / den <= factor * l_unscaled * (1.0 + 1e-6));
        }
    }
}

#[test]
fn extragradient_distance_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let inst = quad_instance(&mut rng, 4, 3, 9.0, 2.0, 7.0, 0.5, 1.5);
        let t = tune_parameters(&inst.spec).unwrap();
        let resc = compute_rescaling(&t).unwrap();
        let state = random_state(&mut rng, 4, 3);
        let aux = AuxiliaryProblem::build(&inst.problem, &state, &t).unwrap();
        let exact = aux_solution(&inst, &state, &t);
        let step = 1.0 / (2.0 * scaled_aux_smoothness(&inst.spec, &t, &resc));
        let its = eg_iterates(&aux, &resc, step, 60);
        let d: Vec<f64> = its.iter().map(|z| scaled_dist(&resc, z, &exact)).collect();
        for w in d.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-12) + 1e-14,
                "distance grew: {} -> {}",
                w[0],
                w[1]
            );
        }
    }
}

#[test]
fn coupling_calls_are_two_per_iteration_plus_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let inst = quad_instance(&mut rng, 4, 4, 4.0, 4.0, 20.0, 1.0, 1.0);
        let counted = wrap_counting(&inst.problem);
        let t = tune_parameters(&inst.spec).unwrap();
        let state = random_state(&mut rng, 4, 4);
        let aux = AuxiliaryProblem::build(&counted, &state, &t).unwrap();
        let cfg = InnerConfig {
            floor_tol: 0.0,
            ..InnerConfig::default()
        };
        let sol = Extragradient.solve_aux(&aux, &inst.spec, &t, &cfg, 0).unwrap();
        assert!(sol.iterations > 0);
        assert_eq!(counted.counters().grad_r, 1 + 2 * sol.iterations as u64);
        assert_eq!(counted.counters().grad_p, 0);
    }
}

#[test]
fn accepted_aux_point_checked_against_exact_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let inst = quad_instance(&mut rng, 4, 4, 10.0, 3.0, 8.0, 1.0, 0.5);
        let t = tune_parameters(&inst.spec).unwrap();
        let state = random_state(&mut rng, 4, 4);
        let aux = AuxiliaryProblem::build(&inst.problem, &state, &t).unwrap();
        let cfg = InnerConfig {
            floor_tol: 0.0,
            ..InnerConfig::default()
        };
        let sol = Extragradient.solve_aux(&aux, &inst.spec, &t, &cfg, 0).unwrap();
        let exact = aux_solution(&inst, &state, &t);

        // the criterion, recomputed from the exact gradient of the quadratic subproblem
        let (sx, sy) = (&sol.point.x, &sol.point.y);
        let g = aux.gradient(sx, sy);
        let dx: Vec<f64> = sx.iter().zip(&state.z.x).map(|(a, b)| a - b).collect();
        let dy: Vec<f64> = sy.iter().zip(&state.z.y).map(|(a, b)| a - b).collect();
        assert!(check_inner_criterion(&g.gx, &g.gy, &dx, &dy, &t, 0.0).unwrap());

        // strong monotonicity: |z - z*| <= |F(z)| / mu_aux, and the criterion
        // ties |F(z)| to |z - z^k|, so the accepted point sits in a ball around
        // the exact solution of radius proportional to its own step
        let mu_aux = (1.0 / t.eta_x + inst.spec.mu_x).min(1.0 / t.eta_y + inst.spec.mu_y);
        let f_norm = g.gx.iter().chain(&g.gy).map(|v| v * v).sum::<f64>().sqrt();
        let err = scaled_dist(&Rescaling::identity(), &sol.point, &exact);
        assert!(err <= f_norm / mu_aux * (1.0 + 1e-9) + 1e-12);
        let step = dx.iter().chain(&dy).map(|v| v * v).sum::<f64>().sqrt();
        assert!(err <= step / (mu_aux * 6f64.sqrt() * t.eta_x.min(t.eta_y)) * (1.0 + 1e-9) + 1e-12);
    }
}

#[test]
fn start_already_accepted_costs_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let inst = quad_instance(&mut rng, 2, 2, 1.0, 1.0, 2.0, 1.0, 1.0);
    let t = tune_parameters(&inst.spec).unwrap();
    let mut state = OuterState::new(Point::zeros(2, 2));
    let (rx, ry) = inst.problem.grad_r(&[0.0, 0.0], &[0.0, 0.0]);
    state.grad_p_g = rx.iter().map(|v| -v).collect();
    state.grad_q_g = ry;
    let aux = AuxiliaryProblem::build(&inst.problem, &state, &t).unwrap();
    let sol = Extragradient
        .solve_aux(&aux, &inst.spec, &t, &InnerConfig::default(), 0)
        .unwrap();
    assert_eq!(sol.iterations, 0);
    assert_eq!(sol.point, Point::zeros(2, 2));
}
