//! Seeded instance generators. Every generator draws from a `ChaCha8Rng`
//! in a fixed order, so a seed reproduces the instance bit for bit.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{BenchError, Result};
use crate::instance::{sigma_for_lipschitz, Instance, InstanceData};
use crate::manifest::{Constants, Files, InstanceKind, Manifest, Network, Topology, SCHEMA_VERSION};
use crate::reference::reference_solution;

/// Extreme spectral values are pulled inside the declared interval by this
/// relative margin so that rounding never pushes them outside.
const EDGE: f64 = 1e-9;

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Orthogonal factor of the QR decomposition of a Gaussian matrix.
pub fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    g.qr().q()
}

/// `U diag(eigs) U^T` with a random orthogonal `U`, symmetrized.
pub fn symmetric_with_spectrum(rng: &mut ChaCha8Rng, eigs: &[f64]) -> DMatrix<f64> {
    let u = orthogonal(rng, eigs.len());
    let m = &u * DMatrix::from_diagonal(&DVector::from_column_slice(eigs)) * u.transpose();
    (&m + m.transpose()) * 0.5
}

/// `rows x cols` matrix with the given singular values (at most
/// `min(rows, cols)` of them).
pub fn with_singular_values(rng: &mut ChaCha8Rng, rows: usize, cols: usize, sv: &[f64]) -> DMatrix<f64> {
    let u = orthogonal(rng, rows);
    let v = orthogonal(rng, cols);
    let mut s = DMatrix::zeros(rows, cols);
    for (i, &x) in sv.iter().enumerate() {
        s[(i, i)] = x;
    }
    u * s * v.transpose()
}

/// `n` values in `[lo, hi]` hitting both ends (up to [`EDGE`]); the rest
/// uniform.
fn spread(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0) * (hi - lo) + lo).collect();
    if n > 0 {
        v[0] = hi * (1.0 - EDGE);
    }
    if n > 1 {
        v[1] = lo * (1.0 + EDGE);
    }
    v
}

/// Symmetric matrix with spectrum drawn by [`spread`].
fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let eigs = spread(rng, n, lo, hi);
    symmetric_with_spectrum(rng, &eigs)
}

fn infeasible(msg: impl Into<String>) -> BenchError {
    BenchError::InfeasibleConstants(msg.into())
}

fn base_manifest(kind: InstanceKind, seed: u64, d_x: usize, d_y: usize, constants: Constants) -> Manifest {
    Manifest {
        schema_version: SCHEMA_VERSION.into(),
        id: format!("{}-{seed}", kind.label()),
        kind,
        seed,
        d_x,
        d_y,
        constants,
        files: Files::default(),
        network: None,
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(infeasible(format!("{name} must be positive, got {v}")))
    }
}

fn ordered(lo_name: &str, lo: f64, hi_name: &str, hi: f64, n: usize) -> Result<()> {
    positive(lo_name, lo)?;
    if hi < lo {
        return Err(infeasible(format!("{hi_name} = {hi} is below {lo_name} = {lo}")));
    }
    if n == 1 && hi != lo {
        return Err(infeasible(format!(
            "a 1-dimensional block cannot realise both {lo_name} and {hi_name}"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SppParams {
    pub d_x: usize,
    pub d_y: usize,
    pub l_p: f64,
    pub mu_x: f64,
    pub l_q: f64,
    pub mu_y: f64,
    pub l_r: f64,
}

/// `P`, `Q` PSD with top eigenvalues `L_p`, `L_q`; `B` scaled so that
/// `grad R` is exactly `L_R`-Lipschitz; linear terms place the saddle at a
/// random Gaussian point.
pub fn gen_quadratic_spp(prm: &SppParams, seed: u64) -> Result<Instance> {
    let SppParams {
        d_x,
        d_y,
        l_p,
        mu_x,
        l_q,
        mu_y,
        l_r,
    } = *prm;
    if d_x == 0 || d_y == 0 {
        return Err(infeasible("dimensions must be positive"));
    }
    positive("mu_x", mu_x)?;
    positive("mu_y", mu_y)?;
    if !(l_p >= 0.0 && l_q >= 0.0) {
        return Err(infeasible("L_p and L_q must be non-negative"));
    }
    let sigma = sigma_for_lipschitz(l_r, mu_x, mu_y)
        .ok_or_else(|| infeasible(format!("L_R = {l_r} is below max(mu_x, mu_y)")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_symmetric(&mut rng, d_x, 0.0, l_p);
    let q = random_symmetric(&mut rng, d_y, 0.0, l_q);
    let r = d_x.min(d_y);
    let sv = spread(&mut rng, r, 0.0, sigma);
    let b = with_singular_values(&mut rng, d_x, d_y, &sv);
    let x = gaussian_vector(&mut rng, d_x);
    let y = gaussian_vector(&mut rng, d_y);
    let a = -(&p * &x + &x * mu_x + &b * &y);
    let c = b.transpose() * &x - &q * &y - &y * mu_y;
    let constants = Constants {
        l_p: Some(l_p),
        l_q: Some(l_q),
        l_r: Some(l_r),
        mu_x: Some(mu_x),
        mu_y: Some(mu_y),
        ..Default::default()
    };
    Ok(Instance {
        manifest: base_manifest(InstanceKind::QuadraticSpp, seed, d_x, d_y, constants),
        data: InstanceData {
            p,
            a,
            q,
            c,
            b,
            mu_x,
            mu_y,
            x_star: Some(x),
            y_star: Some(y),
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilinearParams {
    pub d_x: usize,
    pub d_y: usize,
    pub l_p: f64,
    pub mu_p: f64,
    pub l_q: f64,
    pub mu_q: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

/// `p(x) + x^T B y - q(y)` with spectra of `P`, `Q` in `[mu, L]` and singular
/// values of `B` in `[sigma_min, sigma_max]`, all extremes attained.
pub fn gen_bilinear(prm: &BilinearParams, seed: u64) -> Result<Instance> {
    let BilinearParams {
        d_x,
        d_y,
        l_p,
        mu_p,
        l_q,
        mu_q,
        sigma_min,
        sigma_max,
    } = *prm;
    if d_x == 0 || d_y == 0 {
        return Err(infeasible("dimensions must be positive"));
    }
    ordered("mu_p", mu_p, "L_p", l_p, d_x)?;
    ordered("mu_q", mu_q, "L_q", l_q, d_y)?;
    ordered("sigma_min", sigma_min, "sigma_max", sigma_max, d_x.min(d_y))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_symmetric(&mut rng, d_x, mu_p, l_p);
    let q = random_symmetric(&mut rng, d_y, mu_q, l_q);
    let sv = spread(&mut rng, d_x.min(d_y), sigma_min, sigma_max);
    let b = with_singular_values(&mut rng, d_x, d_y, &sv);
    let x = gaussian_vector(&mut rng, d_x);
    let y = gaussian_vector(&mut rng, d_y);
    let a = -(&p * &x + &b * &y);
    let c = b.transpose() * &x - &q * &y;
    let constants = Constants {
        l_p: Some(l_p),
        mu_p: Some(mu_p),
        l_q: Some(l_q),
        mu_q: Some(mu_q),
        lambda_max: Some(sigma_max * sigma_max),
        lambda_min: Some(sigma_min * sigma_min),
        ..Default::default()
    };
    Ok(Instance {
        manifest: base_manifest(InstanceKind::Bilinear, seed, d_x, d_y, constants),
        data: InstanceData {
            p,
            a,
            q,
            c,
            b,
            mu_x: 0.0,
            mu_y: 0.0,
            x_star: Some(x),
            y_star: Some(y),
        },
    })
}

/// Norm bound recorded for a solution block.
fn ball_bound(v: &DVector<f64>) -> f64 {
    (2.0 * v.norm()).max(1e-3)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineParams {
    pub d_x: usize,
    /// Number of constraints.
    pub m: usize,
    pub l_p: f64,
    pub mu_p: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

/// `min p(x) s.t. B^T x = c` with `B` of full column rank.
pub fn gen_affine_constrained(prm: &AffineParams, seed: u64) -> Result<Instance> {
    let AffineParams {
        d_x,
        m,
        l_p,
        mu_p,
        sigma_min,
        sigma_max,
    } = *prm;
    if m == 0 || m > d_x {
        return Err(infeasible(format!("need 1 <= m <= d_x, got m = {m}, d_x = {d_x}")));
    }
    ordered("mu_p", mu_p, "L_p", l_p, d_x)?;
    ordered("sigma_min", sigma_min, "sigma_max", sigma_max, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_symmetric(&mut rng, d_x, mu_p, l_p);
    let sv = spread(&mut rng, m, sigma_min, sigma_max);
    let b = with_singular_values(&mut rng, d_x, m, &sv);
    let x = gaussian_vector(&mut rng, d_x);
    let y = gaussian_vector(&mut rng, m);
    let a = -(&p * &x + &b * &y);
    let c = b.transpose() * &x;
    let constants = Constants {
        l_p: Some(l_p),
        mu_p: Some(mu_p),
        lambda_max: Some(sigma_max * sigma_max),
        lambda_min: Some(sigma_min * sigma_min),
        d_y_bound: Some(ball_bound(&y)),
        ..Default::default()
    };
    Ok(Instance {
        manifest: base_manifest(InstanceKind::AffineConstrained, seed, d_x, m, constants),
        data: InstanceData {
            p,
            a,
            q: DMatrix::zeros(m, m),
            c,
            b,
            mu_x: 0.0,
            mu_y: 0.0,
            x_star: Some(x),
            y_star: Some(y),
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearBilinearParams {
    pub dim: usize,
    /// Ridge added to the sample covariance; lower bound on its spectrum.
    pub ridge: f64,
}

/// `x^T d + x^T B y - y^T c` where `B = Z^T Z / N + ridge I` is the ridge
/// covariance of a synthetic Gaussian data matrix `Z` with `N = 2 dim`
/// samples. `d` is stored in the `a` slot.
pub fn gen_linear_bilinear(prm: &LinearBilinearParams, seed: u64) -> Result<Instance> {
    let LinearBilinearParams { dim, ridge } = *prm;
    if dim == 0 {
        return Err(infeasible("dimension must be positive"));
    }
    positive("ridge", ridge)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = 2 * dim;
    let z = DMatrix::from_fn(samples, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let cov = z.transpose() * &z / samples as f64;
    let b = (&cov + cov.transpose()) * 0.5 + DMatrix::identity(dim, dim) * ridge;
    let eig = (&b * b.transpose()).symmetric_eigenvalues();
    let x = gaussian_vector(&mut rng, dim);
    let y = gaussian_vector(&mut rng, dim);
    let a = -(&b * &y);
    let c = b.transpose() * &x;
    let constants = Constants {
        lambda_max: Some(eig.max()),
        lambda_min: Some(eig.min()),
        d_x_bound: Some(ball_bound(&x)),
        d_y_bound: Some(ball_bound(&y)),
        ..Default::default()
    };
    Ok(Instance {
        manifest: base_manifest(InstanceKind::LinearBilinear, seed, dim, dim, constants),
        data: InstanceData {
            p: DMatrix::zeros(dim, dim),
            a,
            q: DMatrix::zeros(dim, dim),
            c,
            b,
            mu_x: 0.0,
            mu_y: 0.0,
            x_star: Some(x),
            y_star: Some(y),
        },
    })
}

/// Graph Laplacian `D - A` of the topology on `n` nodes.
pub fn laplacian(topology: Topology, n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    let mut edge = |i: usize, j: usize| {
        l[(i, j)] -= 1.0;
        l[(j, i)] -= 1.0;
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
    };
    match topology {
        Topology::Path => (1..n).for_each(|i| edge(i - 1, i)),
        Topology::Ring => (0..n).for_each(|i| edge(i, (i + 1) % n)),
        Topology::Star => (1..n).for_each(|i| edge(0, i)),
    }
    l
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsensusParams {
    pub nodes: usize,
    pub topology: Topology,
    pub local_mu: f64,
    pub local_l: f64,
    pub local_dim: usize,
}

/// Decentralized least squares: node `i` holds
/// `f_i(x_i) = x_i^T H_i x_i / 2 + g_i^T x_i` and the copies must agree. With the Laplacian factored as
/// `L = W W^T` (`W = U diag(sqrt(lambda))` over the nonzero eigenpairs),
/// agreement is `(W ⊗ I)^T x = 0`, so the coupling matrix is `W ⊗ I`, whose
/// Gram spectrum is the nonzero Laplacian spectrum.
pub fn gen_consensus(prm: &ConsensusParams, seed: u64) -> Result<Instance> {
    let ConsensusParams {
        nodes: n,
        topology,
        local_mu,
        local_l,
        local_dim: m,
    } = *prm;
    let min_nodes = if topology == Topology::Ring { 3 } else { 2 };
    if n < min_nodes {
        return Err(infeasible(format!("{topology:?} needs at least {min_nodes} nodes")));
    }
    if m == 0 {
        return Err(infeasible("local dimension must be positive"));
    }
    ordered("local_mu", local_mu, "local_L", local_l, n * m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // extremes land on the first node(s), the rest of the spectrum is uniform
    let eigs = spread(&mut rng, n * m, local_mu, local_l);
    let mut p = DMatrix::zeros(n * m, n * m);
    for i in 0..n {
        let h = symmetric_with_spectrum(&mut rng, &eigs[i * m..(i + 1) * m]);
        p.view_mut((i * m, i * m), (m, m)).copy_from(&h);
    }
    let a = gaussian_vector(&mut rng, n * m);

    let lap = laplacian(topology, n);
    let eig = lap.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    // drop the zero eigenvalue of the connected graph
    let kept = &order[1..];
    let mut w = DMatrix::zeros(n, n - 1);
    for (col, &k) in kept.iter().enumerate() {
        let s = eig.eigenvalues[k].max(0.0).sqrt();
        w.set_column(col, &(eig.eigenvectors.column(k) * s));
    }
    let mut b = DMatrix::zeros(n * m, (n - 1) * m);
    for i in 0..n {
        for k in 0..n - 1 {
            for j in 0..m {
                b[(i * m + j, k * m + j)] = w[(i, k)];
            }
        }
    }
    let lam_max = eig.eigenvalues[*kept.last().unwrap()];
    let lam_min = eig.eigenvalues[kept[0]];
    let d_y = (n - 1) * m;
    let mut data = InstanceData {
        p,
        a,
        q: DMatrix::zeros(d_y, d_y),
        c: DVector::zeros(d_y),
        b,
        mu_x: 0.0,
        mu_y: 0.0,
        x_star: None,
        y_star: None,
    };
    let z = reference_solution(&data)?;
    let (x, y) = (DVector::from_vec(z.x), DVector::from_vec(z.y));
    let constants = Constants {
        l_p: Some(local_l),
        mu_p: Some(local_mu),
        lambda_max: Some(lam_max),
        lambda_min: Some(lam_min),
        d_y_bound: Some(ball_bound(&y)),
        ..Default::default()
    };
    data.x_star = Some(x);
    data.y_star = Some(y);
    let mut manifest = base_manifest(InstanceKind::Consensus, seed, n * m, d_y, constants);
    manifest.id = format!("consensus-{}-{n}-{seed}", topology_label(topology));
    manifest.network = Some(Network {
        topology,
        nodes: n,
        local_dim: m,
        laplacian_lambda_max: lam_max,
        laplacian_lambda_min_pos: lam_min,
    });
    Ok(Instance { manifest, data })
}

pub fn topology_label(t: Topology) -> &'static str {
    match t {
        Topology::Path => "path",
        Topology::Ring => "ring",
        Topology::Star => "star",
    }
}

/// Minimizer of `sum_i f_i` over a single shared block, i.e. the consensus
/// value every node should agree on.
pub fn centralized_minimizer(inst: &Instance) -> Option<DVector<f64>> {
    let net = inst.manifest.network.as_ref()?;
    let (n, m) = (net.nodes, net.local_dim);
    let d = &inst.data;
    let mut h = DMatrix::zeros(m, m);
    let mut g = DVector::zeros(m);
    for i in 0..n {
        h += d.p.view((i * m, i * m), (m, m));
        g += d.a.rows(i * m, m);
    }
    h.lu().solve(&(-g))
}
