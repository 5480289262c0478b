use std::cell::Cell;

use serde::{Deserialize, Serialize};

use super::CompositeSaddle;
use crate::scalar::Scalar;

/// Oracle call tallies plus iteration counts of one solver run.
///
/// In bilinear mode `grad_r` counts applications of `B` or `B^T`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCounters {
    pub grad_p: u64,
    pub grad_q: u64,
    pub grad_r: u64,
    pub outer_iterations: u64,
    pub inner_iterations: u64,
}

impl OracleCounters {
    /// Component-wise `self - earlier`, saturating at zero.
    pub fn since(&self, earlier: &OracleCounters) -> OracleCounters {
        OracleCounters {
            grad_p: self.grad_p.saturating_sub(earlier.grad_p),
            grad_q: self.grad_q.saturating_sub(earlier.grad_q),
            grad_r: self.grad_r.saturating_sub(earlier.grad_r),
            outer_iterations: self.outer_iterations.saturating_sub(earlier.outer_iterations),
            inner_iterations: self.inner_iterations.saturating_sub(earlier.inner_iterations),
        }
    }

    pub fn oracle_triple(&self) -> (u64, u64, u64) {
        (self.grad_p, self.grad_q, self.grad_r)
    }
}

/// Problems that can report how many oracle calls they served.
pub trait CountedOracles {
    fn counters(&self) -> OracleCounters;
}

impl<C: CountedOracles + ?Sized> CountedOracles for &C {
    fn counters(&self) -> OracleCounters {
        (**self).counters()
    }
}

/// Delegating wrapper that counts every gradient oracle call.
///
/// Counters use `Cell`, so a wrapper belongs to one run on one thread; wrap
/// the same (shared) problem again for a concurrent run.
#[derive(Debug)]
pub struct CountingProblem<P> {
    inner: P,
    grad_p: Cell<u64>,
    grad_q: Cell<u64>,
    grad_r: Cell<u64>,
}

pub fn wrap_counting<P>(problem: P) -> CountingProblem<P> {
    CountingProblem::new(problem)
}

impl<P> CountingProblem<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            grad_p: Cell::new(0),
            grad_q: Cell::new(0),
            grad_r: Cell::new(0),
        }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn into_inner(self) -> P {
        self.inner
    }

    pub fn reset(&self) {
        self.grad_p.set(0);
        self.grad_q.set(0);
        self.grad_r.set(0);
    }
}

fn bump(c: &Cell<u64>) {
    c.set(c.get() + 1);
}

impl<P> CountedOracles for CountingProblem<P> {
    fn counters(&self) -> OracleCounters {
        OracleCounters {
            grad_p: self.grad_p.get(),
            grad_q: self.grad_q.get(),
            grad_r: self.grad_r.get(),
            ..OracleCounters::default()
        }
    }
}

impl<T: Scalar, P: CompositeSaddle<T>> CompositeSaddle<T> for CountingProblem<P> {
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }
    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }
    fn grad_p(&self, x: &[T]) -> Vec<T> {
        bump(&self.grad_p);
        self.inner.grad_p(x)
    }
    fn grad_q(&self, y: &[T]) -> Vec<T> {
        bump(&self.grad_q);
        self.inner.grad_q(y)
    }
    fn grad_r(&self, x: &[T], y: &[T]) -> (Vec<T>, Vec<T>) {
        bump(&self.grad_r);
        self.inner.grad_r(x, y)
    }
    fn value_p(&self, x: &[T]) -> Option<T> {
        self.inner.value_p(x)
    }
    fn value_q(&self, y: &[T]) -> Option<T> {
        self.inner.value_q(y)
    }
    fn value_r(&self, x: &[T], y: &[T]) -> Option<T> {
        self.inner.value_r(x, y)
    }
}
