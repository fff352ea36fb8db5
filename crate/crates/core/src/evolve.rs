//! Unitary evolution `exp(-iHt)|psi0>` by dense eigendecomposition or by
//! Lanczos-Krylov propagation, plus overlap series and recurrence detection.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianOp, DENSE_MAX_SPINS};
use crate::scalar::{cabs, czero, phase_factor, real, to_f64, Real};
use crate::state::{axpy, dotc, norm, require_normalized, scale, StateVector};

pub const DEFAULT_KRYLOV_DIM: usize = 30;
pub const DEFAULT_KRYLOV_TOL: f64 = 1e-10;
pub const DEFAULT_RECURRENCE_THRESHOLD: f64 = 1.0 - 1e-3;

/// Sub-step halvings allowed before giving up.
const MAX_HALVINGS: u32 = 40;

/// Time points evolved per dense batch.
const DENSE_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovParams<T: Real> {
    pub dim: usize,
    pub tol: T,
}

impl<T: Real> Default for KrylovParams<T> {
    fn default() -> Self {
        KrylovParams { dim: DEFAULT_KRYLOV_DIM, tol: real(DEFAULT_KRYLOV_TOL) }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KrylovStats {
    pub steps: usize,
    pub matvecs: usize,
    pub max_norm_drift: f64,
    pub max_error_estimate: f64,
}

impl KrylovStats {
    fn merge(&mut self, other: &KrylovStats) {
        self.steps += other.steps;
        self.matvecs += other.matvecs;
        self.max_norm_drift = self.max_norm_drift.max(other.max_norm_drift);
        self.max_error_estimate = self.max_error_estimate.max(other.max_error_estimate);
    }
}

#[derive(Debug, Clone)]
pub enum Propagator<T: Real> {
    /// `H = V diag(eigenvalues) V^T`, eigenvectors column-major.
    Dense { dim: usize, eigenvalues: Vec<T>, eigenvectors: Vec<T> },
    Krylov(KrylovParams<T>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorMode {
    Dense,
    Krylov,
}

impl<T: Real> Propagator<T> {
    pub fn dense(h: &HamiltonianOp<T>) -> Result<Self> {
        let matrix = h.to_dense()?;
        let (eigenvalues, eigenvectors) = T::symmetric_eigen(h.dim(), &matrix)?;
        Ok(Propagator::Dense { dim: h.dim(), eigenvalues, eigenvectors })
    }

    pub fn krylov(params: KrylovParams<T>) -> Result<Self> {
        if params.dim < 2 {
            return Err(Error::Config(vec![format!("krylov dimension must be at least 2, got {}", params.dim)]));
        }
        if !(to_f64(params.tol) > 0.0) {
            return Err(Error::Config(vec![format!("krylov tolerance must be positive, got {}", params.tol)]));
        }
        Ok(Propagator::Krylov(params))
    }

    /// Dense up to `N = 14`, Krylov beyond.
    pub fn auto(h: &HamiltonianOp<T>, params: KrylovParams<T>) -> Result<Self> {
        if h.num_spins() <= DENSE_MAX_SPINS {
            Self::dense(h)
        } else {
            Self::krylov(params)
        }
    }

    pub fn mode(&self) -> PropagatorMode {
        match self {
            Propagator::Dense { .. } => PropagatorMode::Dense,
            Propagator::Krylov(_) => PropagatorMode::Krylov,
        }
    }

    pub fn eigenvalues(&self) -> Option<&[T]> {
        match self {
            Propagator::Dense { eigenvalues, .. } => Some(eigenvalues),
            Propagator::Krylov(_) => None,
        }
    }
}

/// `exp(-iHt)|psi0>`.
pub fn evolve_state<T: Real>(
    p: &Propagator<T>,
    h: &HamiltonianOp<T>,
    psi0: &StateVector<T>,
    t: T,
) -> Result<StateVector<T>> {
    let mut traj = trajectory(p, h, psi0, &[t])?;
    let (_, state) = traj.next().expect("one time point")?;
    Ok(state)
}

/// States at each time of an ascending grid, produced lazily.
pub fn trajectory<'a, T: Real>(
    p: &'a Propagator<T>,
    h: &'a HamiltonianOp<T>,
    psi0: &StateVector<T>,
    times: &[T],
) -> Result<Trajectory<'a, T>> {
    require_normalized(psi0)?;
    if psi0.num_spins() != h.num_spins() {
        return Err(Error::DimensionMismatch { expected: h.num_spins(), found: psi0.num_spins() });
    }
    check_times(times, false)?;
    let inner = match p {
        Propagator::Dense { dim, eigenvalues, eigenvectors } => {
            if *dim != h.dim() {
                return Err(Error::DimensionMismatch { expected: h.dim(), found: *dim });
            }
            let (re, im): (Vec<T>, Vec<T>) = psi0.amplitudes().iter().map(|z| (z.re, z.im)).unzip();
            let mut both = re;
            both.extend(im);
            let coeffs = T::gemm_tn(*dim, *dim, 2, eigenvectors, &both);
            let coeffs = (0..*dim).map(|k| Complex::new(coeffs[k], coeffs[dim + k])).collect();
            Inner::Dense { eigenvalues, eigenvectors, coeffs, buffer: Vec::new() }
        }
        Propagator::Krylov(params) => Inner::Krylov {
            params: *params,
            current: psi0.amplitudes().to_vec(),
            now: T::zero(),
            substeps: 1,
            lanczos: Lanczos::new(params.dim),
        },
    };
    Ok(Trajectory {
        h,
        num_spins: psi0.num_spins(),
        times: times.to_vec(),
        next: 0,
        inner,
        stats: KrylovStats::default(),
    })
}

enum Inner<'a, T: Real> {
    Dense {
        eigenvalues: &'a [T],
        eigenvectors: &'a [T],
        coeffs: Vec<Complex<T>>,
        buffer: Vec<Vec<Complex<T>>>,
    },
    Krylov {
        params: KrylovParams<T>,
        current: Vec<Complex<T>>,
        now: T,
        /// Sub-step count carried over to the next grid interval.
        substeps: u64,
        lanczos: Lanczos<T>,
    },
}

pub struct Trajectory<'a, T: Real> {
    h: &'a HamiltonianOp<T>,
    num_spins: usize,
    times: Vec<T>,
    next: usize,
    inner: Inner<'a, T>,
    stats: KrylovStats,
}

impl<T: Real> Trajectory<'_, T> {
    /// Accumulated Krylov statistics (all zero in dense mode).
    pub fn stats(&self) -> KrylovStats {
        self.stats
    }

    fn dense_batch(&mut self) {
        let Inner::Dense { eigenvalues, eigenvectors, coeffs, buffer } = &mut self.inner else {
            unreachable!()
        };
        let dim = eigenvalues.len();
        let batch: Vec<T> = self.times[self.next..(self.next + DENSE_BATCH).min(self.times.len())].to_vec();
        let cols = 2 * batch.len();
        let mut rhs = vec![T::zero(); dim * cols];
        for (j, &t) in batch.iter().enumerate() {
            for k in 0..dim {
                let z = coeffs[k] * phase_factor(eigenvalues[k] * t);
                rhs[(2 * j) * dim + k] = z.re;
                rhs[(2 * j + 1) * dim + k] = z.im;
            }
        }
        let out = T::gemm(dim, dim, cols, eigenvectors, &rhs);
        buffer.clear();
        for j in (0..batch.len()).rev() {
            let re = &out[(2 * j) * dim..(2 * j + 1) * dim];
            let im = &out[(2 * j + 1) * dim..(2 * j + 2) * dim];
            buffer.push(re.iter().zip(im).map(|(&a, &b)| Complex::new(a, b)).collect());
        }
    }

    fn krylov_advance(&mut self, target: T) -> Result<Vec<Complex<T>>> {
        let Inner::Krylov { params, current, now, substeps, lanczos } = &mut self.inner else {
            unreachable!()
        };
        let interval = target - *now;
        if interval > T::zero() {
            let mut stats = KrylovStats::default();
            // Steps are uniform within an interval; a failed error estimate halves
            // the step and the remainder is covered at the finer size.
            let mut count = *substeps;
            let mut done = 0u64;
            let mut halvings = 0;
            while done < count {
                let tau = interval / real::<T>(count as f64);
                lanczos.build(self.h, current, Some((tau, params.tol)), &mut stats)?;
                let mut err = lanczos.error_estimate(tau)?;
                let mut tau_now = tau;
                while to_f64(err) > to_f64(params.tol) {
                    halvings += 1;
                    if halvings > MAX_HALVINGS {
                        return Err(Error::NonConvergence(format!(
                            "Krylov error estimate {:e} above tolerance {:e} with subspace {}",
                            to_f64(err),
                            to_f64(params.tol),
                            params.dim
                        )));
                    }
                    count *= 2;
                    done *= 2;
                    tau_now = tau_now / real(2.0);
                    err = lanczos.error_estimate(tau_now)?;
                }
                stats.max_error_estimate = stats.max_error_estimate.max(to_f64(err));
                lanczos.apply(tau_now, current)?;
                let nrm = norm(current);
                stats.max_norm_drift = stats.max_norm_drift.max((to_f64(nrm) - 1.0).abs());
                scale(T::one() / nrm, current);
                stats.steps += 1;
                done += 1;
            }
            *substeps = count;
            self.stats.merge(&stats);
        }
        *now = target;
        Ok(current.clone())
    }
}

impl<T: Real> Iterator for Trajectory<'_, T> {
    type Item = Result<(T, StateVector<T>)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.times.len() {
            return None;
        }
        let t = self.times[self.next];
        let amps = match self.inner {
            Inner::Dense { .. } => {
                if matches!(&self.inner, Inner::Dense { buffer, .. } if buffer.is_empty()) {
                    self.dense_batch();
                }
                let Inner::Dense { buffer, .. } = &mut self.inner else { unreachable!() };
                Ok(buffer.pop().expect("batch is nonempty"))
            }
            Inner::Krylov { .. } => self.krylov_advance(t),
        };
        self.next += 1;
        Some(amps.map(|a| (t, StateVector::from_raw(self.num_spins, a))))
    }
}

/// Lanczos basis with full reorthogonalization, reused across error
/// estimates for different step sizes.
struct Lanczos<T: Real> {
    max_dim: usize,
    basis: Vec<Vec<Complex<T>>>,
    /// Allocated vectors recycled between builds.
    spare: Vec<Vec<Complex<T>>>,
    alpha: Vec<T>,
    beta: Vec<T>,
    /// Residual norm after the last basis vector; zero on invariant subspace.
    residual: T,
    eig: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Real> Lanczos<T> {
    fn new(max_dim: usize) -> Self {
        Lanczos {
            max_dim,
            basis: Vec::with_capacity(max_dim),
            spare: Vec::new(),
            alpha: Vec::new(),
            beta: Vec::new(),
            residual: T::zero(),
            eig: None,
        }
    }

    /// Builds the basis from `start`. With `stop = Some((tau, tol))` growth ends
    /// early once the error estimate for a step of `tau` is within `tol`.
    fn build(
        &mut self,
        h: &HamiltonianOp<T>,
        start: &[Complex<T>],
        stop: Option<(T, T)>,
        stats: &mut KrylovStats,
    ) -> Result<()> {
        let mut spare = std::mem::take(&mut self.spare);
        spare.append(&mut self.basis);
        self.alpha.clear();
        self.beta.clear();
        self.eig = None;
        let take = |spare: &mut Vec<Vec<Complex<T>>>| spare.pop().unwrap_or_else(|| vec![czero(); start.len()]);

        let mut v0 = take(&mut spare);
        v0.copy_from_slice(start);
        let n0 = norm(&v0);
        scale(T::one() / n0, &mut v0);
        self.basis.push(v0);
        let breakdown = real::<T>(1e-13) * h.norm_bound().max(T::one());
        loop {
            let j = self.basis.len() - 1;
            let mut w = take(&mut spare);
            h.apply_into(&self.basis[j], &mut w)?;
            stats.matvecs += 1;
            let a = dotc(&self.basis[j], &w).re;
            axpy(Complex::new(-a, T::zero()), &self.basis[j], &mut w);
            if j > 0 {
                let b = self.beta[j - 1];
                axpy(Complex::new(-b, T::zero()), &self.basis[j - 1], &mut w);
            }
            for _ in 0..2 {
                for v in &self.basis {
                    let c = dotc(v, &w);
                    axpy(-c, v, &mut w);
                }
            }
            self.alpha.push(a);
            let b = norm(&w);
            let converged = match stop {
                Some((tau, tol)) if self.alpha.len() >= 4 && self.alpha.len() % 2 == 0 => {
                    self.eig = Some(tridiagonal_eigen(&self.alpha, &self.beta)?);
                    self.residual = b;
                    self.error_estimate(tau)? <= tol
                }
                _ => false,
            };
            if converged || self.basis.len() == self.max_dim || b <= breakdown {
                self.residual = if b <= breakdown { T::zero() } else { b };
                spare.push(w);
                break;
            }
            scale(T::one() / b, &mut w);
            self.beta.push(b);
            self.basis.push(w);
        }
        self.spare = spare;
        self.eig = Some(tridiagonal_eigen(&self.alpha, &self.beta)?);
        Ok(())
    }

    /// `exp(-i T tau) e_1` in the Lanczos basis.
    fn coefficients(&self, tau: T) -> Vec<Complex<T>> {
        let (vals, vecs) = self.eig.as_ref().expect("basis built");
        let m = vals.len();
        let mut y = vec![czero(); m];
        for k in 0..m {
            let w = phase_factor(vals[k] * tau).scale(vecs[k * m]);
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += w.scale(vecs[k * m + i]);
            }
        }
        y
    }

    fn error_estimate(&self, tau: T) -> Result<T> {
        let y = self.coefficients(tau);
        let e = self.residual * cabs(*y.last().expect("nonempty"));
        if !to_f64(e).is_finite() {
            return Err(Error::NonConvergence("Krylov error estimate is not finite".into()));
        }
        Ok(e)
    }

    fn apply(&self, tau: T, out: &mut [Complex<T>]) -> Result<()> {
        let y = self.coefficients(tau);
        out.iter_mut().for_each(|z| *z = czero());
        for (c, v) in y.iter().zip(&self.basis) {
            axpy(*c, v, out);
        }
        Ok(())
    }
}

fn tridiagonal_eigen<T: Real>(alpha: &[T], beta: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let m = alpha.len();
    let mut tri = vec![T::zero(); m * m];
    for i in 0..m {
        tri[i * m + i] = alpha[i];
        if i + 1 < m {
            tri[i * m + i + 1] = beta[i];
            tri[(i + 1) * m + i] = beta[i];
        }
    }
    small_symmetric_eigen(m, &tri)
}

fn small_symmetric_eigen<T: Real>(m: usize, col_major: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let mat = nalgebra::DMatrix::from_column_slice(m, m, col_major);
    let eig = nalgebra::SymmetricEigen::try_new(mat, T::default_epsilon(), 10_000)
        .ok_or_else(|| Error::NonConvergence("tridiagonal eigensolver".into()))?;
    Ok((eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors.as_slice().to_vec()))
}

fn check_times<T: Real>(times: &[T], from_zero: bool) -> Result<()> {
    if times.is_empty() {
        return Err(Error::TimeGrid("empty time grid".into()));
    }
    if to_f64(times[0]) < 0.0 || !to_f64(times[0]).is_finite() {
        return Err(Error::TimeGrid(format!("negative or non-finite start time {}", times[0])));
    }
    if from_zero && times[0] != T::zero() {
        return Err(Error::TimeGrid("series must start at t = 0".into()));
    }
    if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::TimeGrid(format!("times not strictly increasing at {}", w[1])));
    }
    Ok(())
}

/// `t_k = k * dt` for `k = 0..=floor(t_max / dt)`.
pub fn time_grid<T: Real>(t_max: T, dt: T) -> Result<Vec<T>> {
    let (tm, d) = (to_f64(t_max), to_f64(dt));
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::TimeGrid(format!("dt must be positive, got {d}")));
    }
    if !(tm >= 0.0) || !tm.is_finite() {
        return Err(Error::TimeGrid(format!("t_max must be non-negative, got {tm}")));
    }
    let count = (tm / d + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| real::<T>(k as f64) * dt).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T: Real> {
    times: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> TimeSeries<T> {
    pub fn new(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
        }
        check_times(&times, false)?;
        Ok(TimeSeries { times, values })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(self.values[0], |a, b| if b < a { b } else { a })
    }

    /// Mean of the values with `t > after`, or `None` if no point qualifies.
    pub fn mean_after(&self, after: T) -> Option<T> {
        let vals: Vec<T> = self.times.iter().zip(&self.values).filter(|(t, _)| **t > after).map(|(_, v)| *v).collect();
        if vals.is_empty() {
            return None;
        }
        let sum = vals.iter().fold(T::zero(), |a, b| a + *b);
        Some(sum / real(vals.len() as f64))
    }
}

/// `|<psi0|psi(t)>|` on the grid.
pub fn overlap_series<T: Real>(
    p: &Propagator<T>,
    h: &HamiltonianOp<T>,
    psi0: &StateVector<T>,
    times: &[T],
) -> Result<TimeSeries<T>> {
    let mut values = Vec::with_capacity(times.len());
    for item in trajectory(p, h, psi0, times)? {
        let (_, psi) = item?;
        values.push(cabs(dotc(psi0.amplitudes(), psi.amplitudes())));
    }
    TimeSeries::new(times.to_vec(), values)
}

/// First recurrence of the series after it has dropped below `threshold`.
///
/// Each local maximum after the drop is refined by a parabola through it and
/// its neighbours; the first whose refined peak reaches `threshold` gives the
/// period. Returns `None` if the series never drops or never returns.
pub fn recurrence_period<T: Real>(series: &TimeSeries<T>, threshold: T) -> Option<T> {
    let v = series.values();
    let t = series.times();
    let drop = v.iter().position(|&x| x < threshold)?;
    for k in drop.max(1)..v.len() {
        let left = v[k - 1];
        let right = if k + 1 < v.len() { v[k + 1] } else { v[k] };
        if v[k] < left || v[k] < right {
            continue;
        }
        let (peak_t, peak_v) = refine_peak(t, v, k);
        if peak_v >= threshold {
            return Some(peak_t);
        }
    }
    None
}

fn refine_peak<T: Real>(t: &[T], v: &[T], k: usize) -> (T, T) {
    if k + 1 >= v.len() {
        return (t[k], v[k]);
    }
    let (y0, y1, y2) = (v[k - 1], v[k], v[k + 1]);
    let two = real::<T>(2.0);
    let denom = y0 - two * y1 + y2;
    if denom >= T::zero() {
        return (t[k], y1);
    }
    // Vertex of the parabola through three equally spaced samples.
    let shift = real::<T>(0.5) * (y0 - y2) / denom;
    let step = (t[k + 1] - t[k - 1]) / two;
    let peak = y1 - real::<T>(0.25) * (y0 - y2) * shift;
    (t[k] + shift * step, peak)
}
