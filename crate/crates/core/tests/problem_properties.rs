mod common;

use common::{central_diff, gaussian, quad_instance, rel_err, with_spectrum};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saddle_core::problem::{
    BilinearCoupling, CompositeProblem, FnFunction, IsotropicQuadratic, Quadratic, SmoothFunction,
};
use saddle_core::{
    bregman, validate_spec, weighted_distance_sq, wrap_counting, CompositeSaddle, CountedOracles, Error, Matrix, Point,
    Spec,
};

#[derive(Clone, Copy, Debug)]
enum Call {
    P,
    Q,
    R,
}

fn toy() -> saddle_core::QuadraticSaddle {
    CompositeProblem::new(
        Quadratic::isotropic(2, 1.0),
        Quadratic::isotropic(3, 2.0),
        BilinearCoupling::new(Matrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64), 1.0, 1.0),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn counters_match_any_interleaving(calls in prop::collection::vec(
        prop_oneof![Just(Call::P), Just(Call::Q), Just(Call::R)], 0..200)
    ) {
        let wrapped = wrap_counting(toy());
        let (x, y) = (vec![0.5, -1.0], vec![1.0, 0.0, 2.0]);
        let mut expect = (0u64, 0u64, 0u64);
        for c in &calls {
            match c {
                Call::P => { wrapped.grad_p(&x); expect.0 += 1; }
                Call::Q => { wrapped.grad_q(&y); expect.1 += 1; }
                Call::R => { wrapped.grad_r(&x, &y); expect.2 += 1; }
            }
            // value oracles are diagnostics and never counted
            wrapped.value_p(&x);
            wrapped.value_r(&x, &y);
        }
        prop_assert_eq!(wrapped.counters().oracle_triple(), expect);
    }

    #[test]
    fn oracles_are_bitwise_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = quad_instance(&mut rng, 3, 4, 2.0, 3.0, 5.0, 1.0, 0.5);
        let x = gaussian(&mut rng, 3);
        let y = gaussian(&mut rng, 4);
        prop_assert_eq!(inst.problem.grad_p(&x), inst.problem.grad_p(&x));
        prop_assert_eq!(inst.problem.grad_q(&y), inst.problem.grad_q(&y));
        prop_assert_eq!(inst.problem.grad_r(&x, &y), inst.problem.grad_r(&x, &y));
    }

    #[test]
    fn weighted_distance_scales_inversely(
        a in prop::collection::vec(-10.0f64..10.0, 3),
        b in prop::collection::vec(-10.0f64..10.0, 3),
        eta in 0.01f64..100.0,
    ) {
        let pa = Point::new(a[..2].to_vec(), a[2..].to_vec());
        let pb = Point::new(b[..2].to_vec(), b[2..].to_vec());
        let unit = weighted_distance_sq(&pa, &pb, 1.0, 1.0).unwrap();
        let scaled = weighted_distance_sq(&pa, &pb, eta, eta).unwrap();
        prop_assert!((scaled * eta - unit).abs() <= 1e-9 * (1.0 + unit));
    }
}

#[test]
fn fresh_wrapper_reads_zero() {
    let wrapped = wrap_counting(toy());
    assert_eq!(wrapped.counters(), Default::default());
    for _ in 0..5 {
        wrapped.grad_p(&[0.0, 0.0]);
    }
    let c = wrapped.counters();
    assert_eq!((c.grad_p, c.grad_q, c.grad_r), (5, 0, 0));
}

#[test]
fn bregman_nonnegative_on_convex_quadratics() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for trial in 0..10 {
        let d = 2 + trial % 5;
        let eigs: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..10.0)).collect();
        let h = with_spectrum(&mut rng, &eigs);
        let f = Quadratic::new(common::to_dense(&h), gaussian(&mut rng, d)).unwrap();
        for _ in 0..100 {
            let x = gaussian(&mut rng, d);
            let x_ref = gaussian(&mut rng, d);
            let v = bregman(|z| f.value(z), |z| f.gradient(z), &x, &x_ref).unwrap();
            assert!(v >= -1e-10, "negative Bregman divergence {v}");
            checked += 1;
        }
    }
    assert_eq!(checked, 1000);
}

#[test]
fn bregman_needs_value_oracle() {
    let f = FnFunction::new(1, |x: &[f64]| x.to_vec());
    let err = bregman(|z| f.value(z), |z| f.gradient(z), &[1.0], &[0.0]).unwrap_err();
    assert!(matches!(err, Error::MissingValueOracle(_)));
}

#[test]
fn finite_differences_match_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let inst = quad_instance(&mut rng, 4, 3, 5.0, 2.0, 6.0, 1.5, 0.7);
    let iso = IsotropicQuadratic::new(gaussian(&mut rng, 4), 0.3);
    let pr = &inst.problem;
    let h = 1e-5;
    for _ in 0..100 {
        let x = gaussian(&mut rng, 4);
        let y = gaussian(&mut rng, 3);
        let dx = gaussian(&mut rng, 4);
        let dy = gaussian(&mut rng, 3);

        let fd = central_diff(|z| pr.value_p(z).unwrap(), &x, &dx, h);
        let an: f64 = pr.grad_p(&x).iter().zip(&dx).map(|(g, d)| g * d).sum();
        assert!(rel_err(fd, an) <= 1e-5, "p: {fd} vs {an}");

        let fd = central_diff(|z| pr.value_q(z).unwrap(), &y, &dy, h);
        let an: f64 = pr.grad_q(&y).iter().zip(&dy).map(|(g, d)| g * d).sum();
        assert!(rel_err(fd, an) <= 1e-5, "q: {fd} vs {an}");

        let (gx, gy) = pr.grad_r(&x, &y);
        let fd = central_diff(|z| pr.value_r(z, &y).unwrap(), &x, &dx, h);
        let an: f64 = gx.iter().zip(&dx).map(|(g, d)| g * d).sum();
        assert!(rel_err(fd, an) <= 1e-5, "R_x: {fd} vs {an}");
        let fd = central_diff(|z| pr.value_r(&x, z).unwrap(), &y, &dy, h);
        let an: f64 = gy.iter().zip(&dy).map(|(g, d)| g * d).sum();
        assert!(rel_err(fd, an) <= 1e-5, "R_y: {fd} vs {an}");

        let fd = central_diff(|z| iso.value(z).unwrap(), &x, &dx, h);
        let an: f64 = iso.gradient(&x).iter().zip(&dx).map(|(g, d)| g * d).sum();
        assert!(rel_err(fd, an) <= 1e-5, "isotropic: {fd} vs {an}");
    }
}

#[test]
fn spec_validation_examples() {
    assert!(validate_spec(&Spec::new(4.0, 1.0, 2.0, 1.0, 1.0)).is_ok());
    assert!(matches!(
        validate_spec(&Spec::new(1.0, 1.0, 1.0, 0.0, 1.0)),
        Err(Error::NonPositiveModulus { .. })
    ));
    assert!(matches!(
        validate_spec(&Spec::new(1.0, 1.0, 0.5, 1.0, 1.0)),
        Err(Error::InconsistentConstants(_))
    ));
}
