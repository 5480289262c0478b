use super::{check_len, CompositeSaddle, Coupling, SmoothFunction};
use crate::error::Result;
use crate::linalg::{self, DenseMatrix, LinearMap};
use crate::scalar::Scalar;

/// `f(x) = 1/2 x^T H x + g^T x + c` with a dense symmetric `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic<T> {
    pub hessian: DenseMatrix<T>,
    pub linear: Vec<T>,
    pub constant: T,
}

impl<T: Scalar> Quadratic<T> {
    pub fn new(hessian: DenseMatrix<T>, linear: Vec<T>) -> Result<Self> {
        check_len(&linear, hessian.nrows())?;
        check_len(&linear, hessian.ncols())?;
        Ok(Self {
            hessian,
            linear,
            constant: T::zero(),
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            hessian: DenseMatrix::zeros(dim, dim),
            linear: vec![T::zero(); dim],
            constant: T::zero(),
        }
    }

    /// `f(x) = g^T x`
    pub fn linear(g: Vec<T>) -> Self {
        let n = g.len();
        Self {
            hessian: DenseMatrix::zeros(n, n),
            linear: g,
            constant: T::zero(),
        }
    }

    /// `f(x) = (s/2) ||x||^2`
    pub fn isotropic(dim: usize, s: T) -> Self {
        Self {
            hessian: DenseMatrix::scaled_identity(dim, s),
            linear: vec![T::zero(); dim],
            constant: T::zero(),
        }
    }
}

impl<T: Scalar> SmoothFunction<T> for Quadratic<T> {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let mut g = self.hessian.matvec(x);
        linalg::axpy(T::one(), &self.linear, &mut g);
        g
    }

    fn value(&self, x: &[T]) -> Option<T> {
        let hx = self.hessian.matvec(x);
        Some(T::lit(0.5) * linalg::dot(x, &hx) + linalg::dot(&self.linear, x) + self.constant)
    }
}

/// `f(x) = <g, x> + coeff ||x||^2`, without a dense Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct IsotropicQuadratic<T> {
    pub linear: Vec<T>,
    pub coeff: T,
}

impl<T: Scalar> IsotropicQuadratic<T> {
    pub fn new(linear: Vec<T>, coeff: T) -> Self {
        Self { linear, coeff }
    }
}

impl<T: Scalar> SmoothFunction<T> for IsotropicQuadratic<T> {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let two = T::lit(2.0) * self.coeff;
        x.iter().zip(&self.linear).map(|(&x, &g)| g + two * x).collect()
    }

    fn value(&self, x: &[T]) -> Option<T> {
        Some(linalg::dot(&self.linear, x) + self.coeff * linalg::norm_sq(x))
    }
}

type GradFn<T> = Box<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
type ValueFn<T> = Box<dyn Fn(&[T]) -> T + Send + Sync>;

/// Closure-backed [`SmoothFunction`].
pub struct FnFunction<T> {
    dim: usize,
    grad: GradFn<T>,
    value: Option<ValueFn<T>>,
}

impl<T: Scalar> FnFunction<T> {
    pub fn new(dim: usize, grad: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            grad: Box::new(grad),
            value: None,
        }
    }

    pub fn with_value(mut self, value: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        self.value = Some(Box::new(value));
        self
    }
}

impl<T: Scalar> SmoothFunction<T> for FnFunction<T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn gradient(&self, x: &[T]) -> Vec<T> {
        (self.grad)(x)
    }
    fn value(&self, x: &[T]) -> Option<T> {
        self.value.as_ref().map(|f| f(x))
    }
}

type CouplingGradFn<T> = Box<dyn Fn(&[T], &[T]) -> (Vec<T>, Vec<T>) + Send + Sync>;
type CouplingValueFn<T> = Box<dyn Fn(&[T], &[T]) -> T + Send + Sync>;

/// Closure-backed [`Coupling`].
pub struct FnCoupling<T> {
    d_x: usize,
    d_y: usize,
    grad: CouplingGradFn<T>,
    value: Option<CouplingValueFn<T>>,
}

impl<T: Scalar> FnCoupling<T> {
    pub fn new(d_x: usize, d_y: usize, grad: impl Fn(&[T], &[T]) -> (Vec<T>, Vec<T>) + Send + Sync + 'static) -> Self {
        Self {
            d_x,
            d_y,
            grad: Box::new(grad),
            value: None,
        }
    }

    pub fn with_value(mut self, value: impl Fn(&[T], &[T]) -> T + Send + Sync + 'static) -> Self {
        self.value = Some(Box::new(value));
        self
    }
}

impl<T: Scalar> Coupling<T> for FnCoupling<T> {
    fn dims(&self) -> (usize, usize) {
        (self.d_x, self.d_y)
    }
    fn gradient(&self, x: &[T], y: &[T]) -> (Vec<T>, Vec<T>) {
        (self.grad)(x, y)
    }
    fn value(&self, x: &[T], y: &[T]) -> Option<T> {
        self.value.as_ref().map(|f| f(x, y))
    }
}

/// `R(x, y) = (mu_x/2)||x||^2 + x^T B y - (mu_y/2)||y||^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearCoupling<T, M> {
    pub matrix: M,
    pub mu_x: T,
    pub mu_y: T,
}

impl<T: Scalar, M: LinearMap<T>> BilinearCoupling<T, M> {
    pub fn new(matrix: M, mu_x: T, mu_y: T) -> Self {
        Self { matrix, mu_x, mu_y }
    }
}

impl<T: Scalar, M: LinearMap<T>> Coupling<T> for BilinearCoupling<T, M> {
    fn dims(&self) -> (usize, usize) {
        (self.matrix.rows(), self.matrix.cols())
    }

    fn gradient(&self, x: &[T], y: &[T]) -> (Vec<T>, Vec<T>) {
        let mut gx = self.matrix.apply(y);
        linalg::axpy(self.mu_x, x, &mut gx);
        let mut gy = self.matrix.apply_transpose(x);
        linalg::axpy(-self.mu_y, y, &mut gy);
        (gx, gy)
    }

    fn value(&self, x: &[T], y: &[T]) -> Option<T> {
        let half = T::lit(0.5);
        let by = self.matrix.apply(y);
        Some(half * self.mu_x * linalg::norm_sq(x) + linalg::dot(x, &by) - half * self.mu_y * linalg::norm_sq(y))
    }
}

/// Assembles a [`CompositeSaddle`] from its three parts.
#[derive(Clone, Debug)]
pub struct CompositeProblem<P, Q, R> {
    pub p: P,
    pub q: Q,
    pub r: R,
}

impl<P, Q, R> CompositeProblem<P, Q, R> {
    pub fn new<T: Scalar>(p: P, q: Q, r: R) -> Result<Self>
    where
        P: SmoothFunction<T>,
        Q: SmoothFunction<T>,
        R: Coupling<T>,
    {
        let (d_x, d_y) = r.dims();
        check_len(&vec![(); p.dim()], d_x)?;
        check_len(&vec![(); q.dim()], d_y)?;
        Ok(Self { p, q, r })
    }
}

impl<T, P, Q, R> CompositeSaddle<T> for CompositeProblem<P, Q, R>
where
    T: Scalar,
    P: SmoothFunction<T>,
    Q: SmoothFunction<T>,
    R: Coupling<T>,
{
    fn dim_x(&self) -> usize {
        self.p.dim()
    }
    fn dim_y(&self) -> usize {
        self.q.dim()
    }
    fn grad_p(&self, x: &[T]) -> Vec<T> {
        self.p.gradient(x)
    }
    fn grad_q(&self, y: &[T]) -> Vec<T> {
        self.q.gradient(y)
    }
    fn grad_r(&self, x: &[T], y: &[T]) -> (Vec<T>, Vec<T>) {
        self.r.gradient(x, y)
    }
    fn value_p(&self, x: &[T]) -> Option<T> {
        self.p.value(x)
    }
    fn value_q(&self, y: &[T]) -> Option<T> {
        self.q.value(y)
    }
    fn value_r(&self, x: &[T], y: &[T]) -> Option<T> {
        self.r.value(x, y)
    }
}

/// Quadratic composites with a dense bilinear coupling; the built-in test and
/// benchmark family.
pub type QuadraticSaddle<T> = CompositeProblem<Quadratic<T>, Quadratic<T>, BilinearCoupling<T, DenseMatrix<T>>>;
