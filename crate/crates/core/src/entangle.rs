//! Reduced density matrices, von Neumann and Levin–Wen topological entropy,
//! and the Uhlmann fidelity between reduced sector states.
//!
//! Entropies are in bits. A pure state's reduced spectra on a region and its
//! complement coincide, so entropies and fidelities are evaluated on
//! whichever side of the cut is smaller.

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::evolve::{trajectory, Propagator, TimeSeries};
use crate::hamiltonian::HamiltonianOp;
use crate::lattice::{full_mask, EdgeLattice, LevinWenRegions, Region};
use crate::scalar::{cplx, real, to_f64, Real};
use crate::stabilizer::{sector_state, sectors_locally_identical, FlipGroup, SectorLabel};
use crate::state::{require_normalized, StateVector};

/// Largest region for which a reduced density matrix is formed.
pub const MAX_REGION_SPINS: usize = 12;

/// Eigenvalues below this are treated as zero.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// Eigenvalues below this abort entropy evaluation.
pub const NEGATIVITY_FLOOR: f64 = -1e-8;

const EIGEN_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    matrix: DMatrix<Complex<T>>,
    region: Region,
}

fn tolerance<T: Real>(base: f64) -> f64 {
    base.max(1e4 * to_f64(T::default_epsilon()))
}

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity (`1e-12`), unit trace (`1e-10`) and the region size.
    pub fn new(matrix: DMatrix<Complex<T>>, region: Region) -> Result<Self> {
        let dim = 1usize << region.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: matrix.nrows() });
        }
        let herm = tolerance::<T>(1e-12);
        for i in 0..dim {
            for j in i..dim {
                let d = matrix[(i, j)] - matrix[(j, i)].conj();
                if to_f64(d.re).abs() > herm || to_f64(d.im).abs() > herm {
                    return Err(Error::InvalidRegion(format!("density matrix not Hermitian at ({i}, {j})")));
                }
            }
        }
        let dm = DensityMatrix { matrix, region };
        let tr = to_f64(dm.trace());
        if (tr - 1.0).abs() > tolerance::<T>(1e-10) {
            return Err(Error::InvalidRegion(format!("density matrix trace {tr} differs from 1")));
        }
        Ok(dm)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.matrix
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).fold(T::zero(), |acc, i| acc + self.matrix[(i, i)].re)
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> T {
        self.matrix
            .iter()
            .fold(T::zero(), |acc, z| acc + z.re * z.re + z.im * z.im)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<T>> {
        hermitian_eigenvalues(self.matrix.clone())
    }

    /// Traces out one edge of the region.
    pub fn partial_trace(&self, edge: usize) -> Result<DensityMatrix<T>> {
        let pos = self
            .region
            .edges()
            .iter()
            .position(|&e| e == edge)
            .ok_or_else(|| Error::InvalidRegion(format!("edge {edge} not in region")))?;
        let rest: Vec<usize> = self.region.edges().iter().copied().filter(|&e| e != edge).collect();
        if rest.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let keep = Region::from_mask(self.region.mask() & !(1u64 << edge));
        let d = 1usize << rest.len();
        let low = (1usize << pos) - 1;
        let expand = |k: usize, bit: usize| ((k & !low) << 1) | (bit << pos) | (k & low);
        let m = DMatrix::from_fn(d, d, |i, j| {
            self.matrix[(expand(i, 0), expand(j, 0))] + self.matrix[(expand(i, 1), expand(j, 1))]
        });
        Ok(DensityMatrix { matrix: m, region: keep })
    }
}

fn hermitian_eigen<T: Real>(m: DMatrix<Complex<T>>) -> Result<SymmetricEigen<Complex<T>, nalgebra::Dyn>> {
    SymmetricEigen::try_new(m, T::default_epsilon(), EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NonConvergence("Hermitian eigensolver".into()))
}

fn hermitian_eigenvalues<T: Real>(m: DMatrix<Complex<T>>) -> Result<Vec<T>> {
    let mut v: Vec<T> = hermitian_eigen(m)?.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(v)
}

/// `offsets[k]` places bit `j` of `k` at spin `bits[j]`.
fn scatter_offsets(bits: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(1 << bits.len());
    out.push(0usize);
    for &b in bits {
        let shifted: Vec<usize> = out.iter().map(|o| o | (1 << b)).collect();
        out.extend(shifted);
    }
    out
}

/// Amplitudes reshaped to a column-major `rows x cols` matrix, split into real
/// and imaginary parts: `Q[r, c] = psi[row_spins(r) | col_spins(c)]`.
struct Reshaped<T> {
    rows: usize,
    cols: usize,
    re: Vec<T>,
    im: Vec<T>,
}

fn reshape<T: Real>(psi: &StateVector<T>, row_bits: &[usize], col_bits: &[usize]) -> Reshaped<T> {
    let ro = scatter_offsets(row_bits);
    let co = scatter_offsets(col_bits);
    let a = psi.amplitudes();
    let (rows, cols) = (ro.len(), co.len());
    let mut re = Vec::with_capacity(rows * cols);
    let mut im = Vec::with_capacity(rows * cols);
    for &c in &co {
        for &r in &ro {
            let z = a[r | c];
            re.push(z.re);
            im.push(z.im);
        }
    }
    Reshaped { rows, cols, re, im }
}

/// `P^dagger Q` (`cols x cols`), contracting over rows.
fn gram<T: Real>(p: &Reshaped<T>, q: &Reshaped<T>, same: bool) -> DMatrix<Complex<T>> {
    let (k, n) = (p.rows, p.cols);
    let rr = T::gemm_tn(n, k, n, &p.re, &q.re);
    let ii = T::gemm_tn(n, k, n, &p.im, &q.im);
    let ri = T::gemm_tn(n, k, n, &p.re, &q.im);
    let ir = if same { None } else { Some(T::gemm_tn(n, k, n, &p.im, &q.re)) };
    DMatrix::from_fn(n, n, |i, j| {
        let re = rr[j * n + i] + ii[j * n + i];
        let im = match &ir {
            Some(ir) => ri[j * n + i] - ir[j * n + i],
            // p = q: Im(P^dagger P) = R - R^T with R = Re(P)^T Im(P).
            None => ri[j * n + i] - ri[i * n + j],
        };
        cplx(re, im)
    })
}

fn check_region<T: Real>(psi: &StateVector<T>, region: &Region) -> Result<()> {
    let n = psi.num_spins();
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if region.edges().last().is_some_and(|&e| e >= n) {
        return Err(Error::InvalidRegion(format!("edge index out of range for {n} spins")));
    }
    if region.len() == n {
        return Err(Error::FullRegion);
    }
    Ok(())
}

/// `rho_A = Tr_B |psi><psi|`.
pub fn reduced_density<T: Real>(psi: &StateVector<T>, region: &Region) -> Result<DensityMatrix<T>> {
    check_region(psi, region)?;
    if region.len() > MAX_REGION_SPINS {
        return Err(Error::RegionTooLarge { size: region.len(), limit: MAX_REGION_SPINS });
    }
    let rest = region.complement(psi.num_spins());
    // Rows run over the traced spins so that the Gram matrix contracts them.
    let q = reshape(psi, rest.edges(), region.edges());
    let g = gram(&q, &q, true);
    Ok(DensityMatrix { matrix: g.map(|z| z.conj()), region: region.clone() })
}

/// `-sum lambda log2 lambda`, dropping eigenvalues below `1e-12`.
pub fn von_neumann_entropy<T: Real>(rho: &DensityMatrix<T>) -> Result<T> {
    entropy_of_spectrum(&rho.eigenvalues()?)
}

fn entropy_of_spectrum<T: Real>(eigenvalues: &[T]) -> Result<T> {
    let clamp = real::<T>(EIGEN_CLAMP);
    let mut s = T::zero();
    for &l in eigenvalues {
        if to_f64(l) < NEGATIVITY_FLOOR {
            return Err(Error::NegativeEigenvalue { value: to_f64(l) });
        }
        if l > clamp {
            s -= l * l.log2();
        }
    }
    Ok(s)
}

/// Entanglement entropy of `region`, evaluated on the smaller side of the cut.
pub fn region_entropy<T: Real>(psi: &StateVector<T>, region: &Region) -> Result<T> {
    check_region(psi, region)?;
    let n = psi.num_spins();
    let side = if 2 * region.len() <= n { region.clone() } else { region.complement(n) };
    von_neumann_entropy(&reduced_density(psi, &side)?)
}

/// `-S_ABCD + S_ABC + S_ACD - S_AC`.
pub fn topological_entropy<T: Real>(psi: &StateVector<T>, regions: &LevinWenRegions) -> Result<T> {
    let parts = [&regions.a, &regions.b, &regions.c, &regions.d];
    for i in 0..4 {
        for j in i + 1..4 {
            if !parts[i].is_disjoint(parts[j]) {
                return Err(Error::Geometry("Levin-Wen regions overlap".into()));
            }
        }
    }
    let full = full_mask(psi.num_spins());
    // A pure global state has zero entropy on the whole lattice.
    let s = |r: Region| {
        if r.mask() == full {
            Ok(T::zero())
        } else {
            region_entropy(psi, &r)
        }
    };
    Ok(-s(regions.abcd())? + s(regions.abc())? + s(regions.acd())? - s(regions.ac())?)
}

fn sqrt_psd<T: Real>(m: &DMatrix<Complex<T>>) -> Result<DMatrix<Complex<T>>> {
    let eig = hermitian_eigen(m.clone())?;
    let clamp = real::<T>(EIGEN_CLAMP);
    let roots: Vec<T> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l > clamp { l.sqrt() } else { T::zero() })
        .collect();
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, k| v[(i, k)].scale(roots[k]));
    Ok(scaled * v.adjoint())
}

fn trace_norm<T: Real>(x: DMatrix<Complex<T>>) -> Result<T> {
    let svd = SVD::try_new(x, false, false, T::default_epsilon(), EIGEN_MAX_ITER)
        .ok_or_else(|| Error::NonConvergence("singular value decomposition".into()))?;
    Ok(svd.singular_values.iter().fold(T::zero(), |acc, s| acc + *s))
}

/// `Tr sqrt(sqrt(rho) sigma sqrt(rho)) = || sqrt(rho) sqrt(sigma) ||_1`.
pub fn uhlmann_fidelity<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    let a = sqrt_psd(&rho.matrix)?;
    let b = sqrt_psd(&sigma.matrix)?;
    trace_norm(a * b)
}

/// Uhlmann fidelity of the reductions of two pure states to `region`.
///
/// When the complement is smaller the value is `||M^dagger K||_1`, with `M`
/// and `K` the region-by-complement amplitude matrices of the two states.
pub fn reduced_fidelity<T: Real>(psi: &StateVector<T>, phi: &StateVector<T>, region: &Region) -> Result<T> {
    check_region(psi, region)?;
    if psi.num_spins() != phi.num_spins() {
        return Err(Error::DimensionMismatch { expected: psi.num_spins(), found: phi.num_spins() });
    }
    let n = psi.num_spins();
    let rest = region.complement(n);
    if region.len() <= rest.len() {
        return uhlmann_fidelity(&reduced_density(psi, region)?, &reduced_density(phi, region)?);
    }
    if rest.len() > MAX_REGION_SPINS {
        return Err(Error::RegionTooLarge { size: rest.len(), limit: MAX_REGION_SPINS });
    }
    let m = reshape(psi, region.edges(), rest.edges());
    let k = reshape(phi, region.edges(), rest.edges());
    trace_norm(gram(&m, &k, false))
}

/// Region requirement for sector fidelity: the sectors must be locally
/// identical on it (so `F(0) = 1`) and it must hold more spins than there
/// are stars crossing its boundary.
pub fn check_bulk_region(lat: &EdgeLattice, grp: &FlipGroup, region: &Region) -> Result<()> {
    if region.is_empty() || region.mask() == full_mask(lat.num_spins()) {
        return Err(Error::RegionCriterion("region must be a proper nonempty subset".into()));
    }
    if !sectors_locally_identical(lat, grp, region) {
        return Err(Error::RegionCriterion("a loop operator cannot be moved off the region".into()));
    }
    let boundary = lat.boundary_stars(region);
    if region.len() <= boundary {
        return Err(Error::RegionCriterion(format!(
            "{} spins do not exceed {} boundary stars",
            region.len(),
            boundary
        )));
    }
    Ok(())
}

/// `F(t)` between the reductions of two evolved sector states.
#[allow(clippy::too_many_arguments)]
pub fn sector_fidelity_series<T: Real>(
    p: &Propagator<T>,
    h: &HamiltonianOp<T>,
    lat: &EdgeLattice,
    grp: &FlipGroup,
    region: &Region,
    pair: (SectorLabel<T>, SectorLabel<T>),
    times: &[T],
) -> Result<TimeSeries<T>> {
    check_bulk_region(lat, grp, region)?;
    let s0 = sector_state(lat, grp, &pair.0)?;
    let s1 = sector_state(lat, grp, &pair.1)?;
    require_normalized(&s0)?;
    let t0 = trajectory(p, h, &s0, times)?;
    let t1 = trajectory(p, h, &s1, times)?;
    let mut values = Vec::with_capacity(times.len());
    for (a, b) in t0.zip(t1) {
        let ((_, x), (_, y)) = (a?, b?);
        values.push(reduced_fidelity(&x, &y, region)?);
    }
    TimeSeries::new(times.to_vec(), values)
}
