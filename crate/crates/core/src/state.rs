//! Normalized Z-basis state vectors over `N` spins.
//!
//! Bit `k` of a basis index is 1 when spin `k` is flipped relative to the
//! all-up vacuum.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{cabs, czero, norm_sqr, real, to_f64, Real};

/// Largest spin count for which a dense state vector may be allocated.
pub const MAX_STATE_SPINS: usize = 30;

/// Tolerance used when validating normalization of caller-supplied states.
pub const NORM_TOLERANCE: f64 = 1e-9;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    num_spins: usize,
    amps: Vec<Complex<T>>,
}

fn check_dim(num_spins: usize, len: usize) -> Result<()> {
    if num_spins > MAX_STATE_SPINS {
        return Err(Error::SizeLimit { what: "state vector", requested: num_spins, limit: MAX_STATE_SPINS });
    }
    if len != 1 << num_spins {
        return Err(Error::DimensionMismatch { expected: 1 << num_spins, found: len });
    }
    Ok(())
}

impl<T: Real> StateVector<T> {
    /// Wraps amplitudes that are already normalized (within `1e-9`).
    pub fn from_amplitudes(num_spins: usize, amps: Vec<Complex<T>>) -> Result<Self> {
        check_dim(num_spins, amps.len())?;
        let norm = to_f64(norm(&amps));
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Unnormalized { norm });
        }
        Ok(StateVector { num_spins, amps })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(num_spins: usize, mut amps: Vec<Complex<T>>) -> Result<Self> {
        check_dim(num_spins, amps.len())?;
        let nrm = norm(&amps);
        if nrm <= T::zero() {
            return Err(Error::Unnormalized { norm: 0.0 });
        }
        let inv = T::one() / nrm;
        amps.iter_mut().for_each(|a| *a = a.scale(inv));
        Ok(StateVector { num_spins, amps })
    }

    pub(crate) fn from_raw(num_spins: usize, amps: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(amps.len(), 1 << num_spins);
        StateVector { num_spins, amps }
    }

    pub fn basis(num_spins: usize, index: usize) -> Result<Self> {
        check_dim(num_spins, 1 << num_spins.min(MAX_STATE_SPINS))?;
        if index >= 1 << num_spins {
            return Err(Error::DimensionMismatch { expected: 1 << num_spins, found: index });
        }
        let mut amps = vec![czero(); 1 << num_spins];
        amps[index] = Complex::new(T::one(), T::zero());
        Ok(StateVector { num_spins, amps })
    }

    /// The all-up reference state `|0...0>`.
    pub fn vacuum(num_spins: usize) -> Result<Self> {
        Self::basis(num_spins, 0)
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex<T>> {
        self.amps
    }

    pub fn norm(&self) -> T {
        norm(&self.amps)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(dotc(&self.amps, &other.amps))
    }

    /// `|<self|other>|`.
    pub fn overlap(&self, other: &Self) -> Result<T> {
        Ok(cabs(self.inner(other)?))
    }
}

/// `sum conj(a_k) b_k`, reduced over fixed-size chunks in index order so the
/// result does not depend on the thread count.
pub(crate) fn dotc<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    let partials: Vec<Complex<T>> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .fold(czero(), |acc, (p, q)| acc + p.conj() * q)
        })
        .collect();
    partials.into_iter().fold(czero(), |acc, p| acc + p)
}

pub(crate) fn norm<T: Real>(a: &[Complex<T>]) -> T {
    let partials: Vec<T> = a
        .par_chunks(CHUNK)
        .map(|x| x.iter().fold(T::zero(), |acc, z| acc + norm_sqr(*z)))
        .collect();
    partials.into_iter().fold(T::zero(), |acc, p| acc + p).sqrt()
}

/// `y += alpha * x`.
pub(crate) fn axpy<T: Real>(alpha: Complex<T>, x: &[Complex<T>], y: &mut [Complex<T>]) {
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(yc, xc)| yc.iter_mut().zip(xc).for_each(|(yi, xi)| *yi += alpha * xi));
}

pub(crate) fn scale<T: Real>(alpha: T, x: &mut [Complex<T>]) {
    x.par_chunks_mut(CHUNK)
        .for_each(|c| c.iter_mut().for_each(|z| *z = z.scale(alpha)));
}

/// Checks unit norm within the crate-wide tolerance.
pub(crate) fn require_normalized<T: Real>(psi: &StateVector<T>) -> Result<()> {
    let n = to_f64(psi.norm());
    if (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Unnormalized { norm: n });
    }
    Ok(())
}

#[allow(dead_code)]
pub(crate) fn tolerance<T: Real>() -> T {
    real(NORM_TOLERANCE)
}
