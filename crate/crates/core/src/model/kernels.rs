//! Dense numeric kernels shared by every sublayer.
//!
//! Reductions use a fixed eight-lane accumulation order, so results depend
//! only on the inputs and never on scheduling.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point element type of latents and weights.
pub trait Real:
    Float + FromPrimitive + Default + Debug + Sum + Send + Sync + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable literal")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Per-token standardization epsilon.
pub const LN_EPS: f64 = 1e-6;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = tail + *x * *y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * *xi;
    }
}

/// Row-major dense matrix mapping `cols`-vectors to `rows`-vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = T::one();
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn apply(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(r), x);
        }
    }

    /// Applies the matrix to each of the `n` row vectors packed in `xs`.
    pub fn apply_rows(&self, xs: &[T]) -> Vec<T> {
        let n = xs.len() / self.cols;
        let mut out = vec![T::zero(); n * self.rows];
        for (x, o) in xs.chunks_exact(self.cols).zip(out.chunks_exact_mut(self.rows)) {
            self.apply(x, o);
        }
        out
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::lit(v.to_f64().unwrap())).collect(),
        }
    }
}

/// In-place numerically stable softmax.
pub fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

/// Standardizes each `d`-wide token to zero mean and unit variance.
pub fn layer_norm<T: Real>(xs: &[T], d: usize) -> Vec<T> {
    let mut out = vec![T::zero(); xs.len()];
    let inv_d = T::lit(1.0 / d as f64);
    let eps = T::lit(LN_EPS);
    for (x, o) in xs.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
        let mean = x.iter().copied().sum::<T>() * inv_d;
        let var = x.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() * inv_d;
        let inv_std = T::one() / (var + eps).sqrt();
        for (oi, xi) in o.iter_mut().zip(x) {
            *oi = (*xi - mean) * inv_std;
        }
    }
    out
}

/// Tanh approximation of GELU.
#[inline]
pub fn gelu_tanh<T: Real>(x: T) -> T {
    let c = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let half = T::lit(0.5);
    half * x * (T::one() + (c * (x + T::lit(0.044715) * x * x * x)).tanh())
}

pub fn all_finite<T: Real>(xs: &[T]) -> bool {
    xs.iter().all(|v| v.is_finite())
}
