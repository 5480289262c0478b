//! Dense vector helpers, a row-major matrix, and matrix-free spectral estimates.

use crate::scalar::Scalar;

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&u, &v)| u * v).sum()
}

pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

pub fn dist_sq<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&u, &v)| {
            let d = u - v;
            d * d
        })
        .sum()
}

/// `y += alpha * x`
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale<T: Scalar>(s: T, a: &[T]) -> Vec<T> {
    a.iter().map(|&v| s * v).collect()
}

/// `a * x + b * y`
pub fn lin_comb<T: Scalar>(a: T, x: &[T], b: T, y: &[T]) -> Vec<T> {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(&u, &v)| a * u + b * v).collect()
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    lin_comb(T::one(), a, -T::one(), b)
}

pub fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    lin_comb(T::one(), a, T::one(), b)
}

pub fn all_finite<T: Scalar>(a: &[T]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// A linear map `R^cols -> R^rows` that can also apply its transpose.
pub trait LinearMap<T: Scalar> {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, v: &[T]) -> Vec<T>;
    fn apply_transpose(&self, v: &[T]) -> Vec<T>;
}

impl<T: Scalar, M: LinearMap<T> + ?Sized> LinearMap<T> for &M {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn apply(&self, v: &[T]) -> Vec<T> {
        (**self).apply(v)
    }
    fn apply_transpose(&self, v: &[T]) -> Vec<T> {
        (**self).apply_transpose(v)
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn scaled_identity(n: usize, s: T) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    /// Builds from row-major data. Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self::from_row_major(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| s * v).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn matvec_transpose(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows, "transpose matvec dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            axpy(vi, self.row(i), &mut out);
        }
        out
    }

    /// `max_ij |a_ij - a_ji|`; zero for symmetric matrices.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols.min(self.rows) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

impl<T: Scalar> LinearMap<T> for DenseMatrix<T> {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, v: &[T]) -> Vec<T> {
        self.matvec(v)
    }
    fn apply_transpose(&self, v: &[T]) -> Vec<T> {
        self.matvec_transpose(v)
    }
}

/// Deterministic, non-degenerate starting vector for iterative eigen-solvers.
fn probe_vector<T: Scalar>(n: usize) -> Vec<T> {
    let v: Vec<T> = (0..n)
        .map(|i| T::lit(1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract()))
        .collect();
    let nrm = norm(&v);
    scale(T::one() / nrm, &v)
}

/// Outcome of an iterative eigenvalue estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenEstimate<T> {
    pub value: T,
    pub iterations: usize,
    /// Number of operator applications spent.
    pub applications: usize,
}

/// Largest eigenvalue of a symmetric positive semi-definite operator by power
/// iteration with a Rayleigh-quotient stopping rule.
pub fn power_iteration<T: Scalar>(
    mut apply: impl FnMut(&[T]) -> Vec<T>,
    dim: usize,
    max_iter: usize,
    rel_tol: T,
) -> EigenEstimate<T> {
    if dim == 0 {
        return EigenEstimate {
            value: T::zero(),
            iterations: 0,
            applications: 0,
        };
    }
    let mut v = probe_vector::<T>(dim);
    let mut lambda = T::zero();
    let mut applications = 0;
    for it in 1..=max_iter.max(1) {
        let w = apply(&v);
        applications += 1;
        let next = dot(&v, &w);
        let nrm = norm(&w);
        if nrm == T::zero() {
            return EigenEstimate {
                value: T::zero(),
                iterations: it,
                applications,
            };
        }
        v = scale(T::one() / nrm, &w);
        let converged = it > 1 && (next - lambda).abs() <= rel_tol * next.abs();
        lambda = next;
        if converged {
            return EigenEstimate {
                value: lambda,
                iterations: it,
                applications,
            };
        }
    }
    EigenEstimate {
        value: lambda,
        iterations: max_iter,
        applications,
    }
}

/// Conjugate gradient for a symmetric positive definite operator. Returns the
/// solution and the number of operator applications.
pub fn conjugate_gradient<T: Scalar>(
    mut apply: impl FnMut(&[T]) -> Vec<T>,
    rhs: &[T],
    rel_tol: T,
    max_iter: usize,
) -> (Vec<T>, usize) {
    let n = rhs.len();
    let mut x = vec![T::zero(); n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rs = norm_sq(&r);
    let target = rel_tol * rel_tol * rs;
    let mut applications = 0;
    for _ in 0..max_iter {
        if rs <= target || rs == T::zero() {
            break;
        }
        let ap = apply(&p);
        applications += 1;
        let denom = dot(&p, &ap);
        if denom <= T::zero() {
            break;
        }
        let step = rs / denom;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        let rs_next = norm_sq(&r);
        p = lin_comb(T::one(), &r, rs_next / rs, &p);
        rs = rs_next;
    }
    (x, applications)
}

/// Smallest eigenvalue of a symmetric positive definite operator by inverse
/// iteration, each linear solve done with conjugate gradients.
pub fn inverse_iteration<T: Scalar>(
    mut apply: impl FnMut(&[T]) -> Vec<T>,
    dim: usize,
    max_iter: usize,
    rel_tol: T,
) -> EigenEstimate<T> {
    if dim == 0 {
        return EigenEstimate {
            value: T::zero(),
            iterations: 0,
            applications: 0,
        };
    }
    let mut v = probe_vector::<T>(dim);
    let mut mu = T::zero();
    let mut applications = 0;
    let cg_tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    for it in 1..=max_iter.max(1) {
        let (w, used) = conjugate_gradient(&mut apply, &v, cg_tol, 4 * dim + 20);
        applications += used;
        let nrm = norm(&w);
        if nrm == T::zero() || !nrm.is_finite() {
            break;
        }
        // Rayleigh quotient of the inverse: <v, A^{-1} v> with unit v.
        let next = dot(&v, &w);
        v = scale(T::one() / nrm, &w);
        let converged = it > 1 && (next - mu).abs() <= rel_tol * next.abs();
        mu = next;
        if converged {
            return EigenEstimate {
                value: T::one() / mu,
                iterations: it,
                applications,
            };
        }
    }
    EigenEstimate {
        value: if mu > T::zero() { T::one() / mu } else { T::zero() },
        iterations: max_iter,
        applications,
    }
}
