//! Scalar abstraction shared by every numerical module.
//!
//! All state vectors, Hamiltonians and density matrices are generic over a
//! real floating type `T: Real`; amplitudes are `Complex<T>`. The crate root
//! exports `f64` aliases for the common case.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Real scalar usable throughout the crate (`f32` or `f64`).
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Full eigendecomposition of a dense real-symmetric matrix stored
    /// column-major. Returns eigenvalues in ascending order and the matching
    /// orthonormal eigenvectors, column-major.
    fn symmetric_eigen(dim: usize, col_major: &[Self]) -> Result<(Vec<Self>, Vec<Self>)>;

    /// `A * B` for column-major `A` (`rows x inner`) and `B` (`inner x cols`).
    fn gemm(rows: usize, inner: usize, cols: usize, a: &[Self], b: &[Self]) -> Vec<Self>;

    /// `A^T * B` for column-major `A` (`inner x rows`) and `B` (`inner x cols`).
    fn gemm_tn(rows: usize, inner: usize, cols: usize, a: &[Self], b: &[Self]) -> Vec<Self>;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn symmetric_eigen(dim: usize, col_major: &[Self]) -> Result<(Vec<Self>, Vec<Self>)> {
                debug_assert_eq!(col_major.len(), dim * dim);
                // Sequential kernels keep results independent of the thread count.
                faer::set_global_parallelism(faer::Par::Seq);
                let mat = faer::Mat::<$t>::from_fn(dim, dim, |i, j| col_major[j * dim + i]);
                let eig = mat
                    .self_adjoint_eigen(faer::Side::Lower)
                    .map_err(|e| Error::NonConvergence(format!("dense eigensolver: {e:?}")))?;
                let s = eig.S().column_vector();
                let u = eig.U();
                let mut order: Vec<usize> = (0..dim).collect();
                order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
                let values = order.iter().map(|&k| s[k]).collect();
                let mut vectors = Vec::with_capacity(dim * dim);
                for &k in &order {
                    vectors.extend((0..dim).map(|i| u[(i, k)]));
                }
                Ok((values, vectors))
            }

            fn gemm(rows: usize, inner: usize, cols: usize, a: &[Self], b: &[Self]) -> Vec<Self> {
                let lhs = faer::MatRef::from_column_major_slice(a, rows, inner);
                let rhs = faer::MatRef::from_column_major_slice(b, inner, cols);
                let mut out = vec![0.0; rows * cols];
                let dst = faer::MatMut::from_column_major_slice_mut(&mut out, rows, cols);
                faer::linalg::matmul::matmul(dst, faer::Accum::Replace, lhs, rhs, 1.0, faer::Par::Seq);
                out
            }

            fn gemm_tn(rows: usize, inner: usize, cols: usize, a: &[Self], b: &[Self]) -> Vec<Self> {
                let lhs = faer::MatRef::from_column_major_slice(a, inner, rows).transpose();
                let rhs = faer::MatRef::from_column_major_slice(b, inner, cols);
                let mut out = vec![0.0; rows * cols];
                let dst = faer::MatMut::from_column_major_slice_mut(&mut out, rows, cols);
                faer::linalg::matmul::matmul(dst, faer::Accum::Replace, lhs, rhs, 1.0, faer::Par::Seq);
                out
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Converts an `f64` literal into `T`.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// `exp(-i * phase)`.
#[inline]
pub(crate) fn phase_factor<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), -phase.sin())
}

#[inline]
pub(crate) fn cabs<T: Real>(z: Complex<T>) -> T {
    norm_sqr(z).sqrt()
}

#[inline]
pub(crate) fn norm_sqr<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}
