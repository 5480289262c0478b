#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use saddle_core::problem::{BilinearCoupling, CompositeProblem, Quadratic};
use saddle_core::{Matrix, Point, QuadraticSaddle, Spec};

pub fn to_dense(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Symmetric PSD matrix with eigenvalues `eigs`.
pub fn with_spectrum(rng: &mut ChaCha8Rng, eigs: &[f64]) -> DMatrix<f64> {
    let u = orthogonal(rng, eigs.len());
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(eigs));
    let m = &u * d * u.transpose();
    (&m + m.transpose()) * 0.5
}

/// Eigenvalues: `top` exactly once, the rest uniform in `[lo, top]`.
pub fn spread_spectrum(rng: &mut ChaCha8Rng, n: usize, lo: f64, top: f64) -> Vec<f64> {
    (0..n)
        .map(|i| if i == 0 { top } else { rng.random_range(lo..=top) })
        .collect()
}

/// `m x n` matrix with singular values `sigmas` (length `min(m, n)`).
pub fn with_singular_values(rng: &mut ChaCha8Rng, m: usize, n: usize, sigmas: &[f64]) -> DMatrix<f64> {
    let u = orthogonal(rng, m);
    let v = orthogonal(rng, n);
    let mut s = DMatrix::zeros(m, n);
    for (i, &sv) in sigmas.iter().enumerate() {
        s[(i, i)] = sv;
    }
    u * s * v.transpose()
}

/// Largest singular value for which `R = (mu_x/2)|x|^2 + x^T B y - (mu_y/2)|y|^2`
/// has an `l_r`-Lipschitz gradient.
pub fn sigma_for_lr(l_r: f64, mu_x: f64, mu_y: f64) -> f64 {
    let a = 2.0 * l_r - (mu_x - mu_y).abs();
    ((a * a - (mu_x + mu_y).powi(2)) / 4.0).max(0.0).sqrt()
}

pub struct QuadInstance {
    pub problem: QuadraticSaddle,
    pub spec: Spec,
    pub solution: Point,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub a: DVector<f64>,
    pub c: DVector<f64>,
}

/// Dense KKT solve of `p(x) + R(x, y) - q(y)` with `p = x^T P x/2 + a^T x`,
/// `q = y^T Q y/2 + c^T y`.
pub fn kkt(
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    b: &DMatrix<f64>,
    mu_x: f64,
    mu_y: f64,
    a: &DVector<f64>,
    c: &DVector<f64>,
) -> Point {
    let (dx, dy) = (p.nrows(), q.nrows());
    let n = dx + dy;
    let mut k = DMatrix::zeros(n, n);
    k.view_mut((0, 0), (dx, dx))
        .copy_from(&(p + DMatrix::identity(dx, dx) * mu_x));
    k.view_mut((0, dx), (dx, dy)).copy_from(b);
    k.view_mut((dx, 0), (dy, dx)).copy_from(&b.transpose());
    k.view_mut((dx, dx), (dy, dy))
        .copy_from(&(-(q + DMatrix::identity(dy, dy) * mu_y)));
    let mut rhs = DVector::zeros(n);
    rhs.rows_mut(0, dx).copy_from(&(-a));
    rhs.rows_mut(dx, dy).copy_from(c);
    let z = k.lu().solve(&rhs).expect("nonsingular KKT system");
    Point::new(
        z.rows(0, dx).iter().copied().collect(),
        z.rows(dx, dy).iter().copied().collect(),
    )
}

/// Random quadratic instance; composite spectra are spread over `[0, L]` with
/// the top eigenvalue exact, coupling singular values spread over `[0, sigma]`.
#[allow(clippy::too_many_arguments)]
pub fn quad_instance(
    rng: &mut ChaCha8Rng,
    dx: usize,
    dy: usize,
    l_p: f64,
    l_q: f64,
    l_r: f64,
    mu_x: f64,
    mu_y: f64,
) -> QuadInstance {
    let eig_p = spread_spectrum(rng, dx, 0.0, l_p);
    let p = with_spectrum(rng, &eig_p);
    let eig_q = spread_spectrum(rng, dy, 0.0, l_q);
    let q = with_spectrum(rng, &eig_q);
    let x_star = DVector::from_vec(gaussian(rng, dx));
    let y_star = DVector::from_vec(gaussian(rng, dy));
    let smax = sigma_for_lr(l_r, mu_x, mu_y);
    let sv = spread_spectrum(rng, dx.min(dy), 0.0, smax);
    let b = with_singular_values(rng, dx, dy, &sv);
    let a = -(&p * &x_star + &x_star * mu_x + &b * &y_star);
    let c = b.transpose() * &x_star - &y_star * mu_y - &q * &y_star;
    let problem = CompositeProblem::new(
        Quadratic::new(to_dense(&p), to_vec(&a)).unwrap(),
        Quadratic::new(to_dense(&q), to_vec(&c)).unwrap(),
        BilinearCoupling::new(to_dense(&b), mu_x, mu_y),
    )
    .unwrap();
    let solution = kkt(&p, &q, &b, mu_x, mu_y, &a, &c);
    QuadInstance {
        problem,
        spec: Spec::new(l_p, l_q, l_r, mu_x, mu_y),
        solution,
        p,
        q,
        b,
        a,
        c,
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Central-difference directional derivative.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], dir: &[f64], h: f64) -> f64 {
    let plus: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + h * d).collect();
    let minus: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a - h * d).collect();
    (f(&plus) - f(&minus)) / (2.0 * h)
}
