//! Pauli strings and the matrix-free quench Hamiltonians `H0`..`H5`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::EdgeLattice;
use crate::scalar::{czero, real, to_f64, Real};
use crate::state::{dotc, require_normalized, StateVector};

/// Largest spin count for which a dense matrix is ever materialized.
pub const DENSE_MAX_SPINS: usize = 14;

const CHUNK: usize = 4096;

/// `coeff * Z^zmask X^xmask`. Even `|xmask & zmask|` keeps the term real symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliString<T: Real> {
    xmask: u64,
    zmask: u64,
    coeff: T,
}

impl<T: Real> PauliString<T> {
    pub fn new(xmask: u64, zmask: u64, coeff: T) -> Result<Self> {
        if (xmask & zmask).count_ones() % 2 != 0 {
            return Err(Error::NonHermitianTerm);
        }
        let c = to_f64(coeff);
        if !c.is_finite() {
            return Err(Error::NonFiniteCoupling(c));
        }
        Ok(PauliString { xmask, zmask, coeff })
    }

    pub fn x(site: usize, coeff: T) -> Self {
        PauliString { xmask: 1 << site, zmask: 0, coeff }
    }

    pub fn z(site: usize, coeff: T) -> Self {
        PauliString { xmask: 0, zmask: 1 << site, coeff }
    }

    pub fn xmask(&self) -> u64 {
        self.xmask
    }

    pub fn zmask(&self) -> u64 {
        self.zmask
    }

    pub fn coeff(&self) -> T {
        self.coeff
    }

    /// Highest spin index touched, plus one.
    fn span(&self) -> usize {
        64 - (self.xmask | self.zmask).leading_zeros() as usize
    }

    #[inline]
    fn sign(&self, b: u64) -> T {
        if (b & self.zmask).count_ones() % 2 == 0 {
            self.coeff
        } else {
            -self.coeff
        }
    }
}

/// `out[b] = coeff * (-1)^{|b & z|} * psi[b ^ x]`.
pub fn pauli_apply<T: Real>(p: &PauliString<T>, psi: &StateVector<T>) -> Result<Vec<Complex<T>>> {
    if p.span() > psi.num_spins() {
        return Err(Error::DimensionMismatch { expected: p.span(), found: psi.num_spins() });
    }
    let a = psi.amplitudes();
    Ok((0..a.len())
        .map(|b| a[b ^ p.xmask as usize].scale(p.sign(b as u64)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliBasis {
    X,
    Z,
}

impl FromStr for PauliBasis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "x" | "X" => Ok(PauliBasis::X),
            "z" | "Z" => Ok(PauliBasis::Z),
            other => Err(Error::UnknownSpec(format!("basis `{other}` (expected x or z)"))),
        }
    }
}

impl fmt::Display for PauliBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PauliBasis::X => "x",
            PauliBasis::Z => "z",
        })
    }
}

/// Per-site or per-pair coupling values.
#[derive(Debug, Clone, PartialEq)]
pub enum Couplings<T: Real> {
    Uniform(T),
    Explicit(Vec<T>),
    /// `mean + width * u` with `u` uniform in `[-1, 1)`, drawn from a seeded ChaCha8 stream.
    Disordered { mean: T, width: T, seed: u64 },
}

impl<T: Real> Couplings<T> {
    pub fn resolve(&self, count: usize) -> Result<Vec<T>> {
        let values = match self {
            Couplings::Uniform(v) => vec![*v; count],
            Couplings::Explicit(v) => {
                if v.len() != count {
                    return Err(Error::CouplingLength { expected: count, found: v.len() });
                }
                v.clone()
            }
            Couplings::Disordered { mean, width, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..count)
                    .map(|_| *mean + *width * real::<T>(rng.gen_range(-1.0..1.0)))
                    .collect()
            }
        };
        if let Some(bad) = values.iter().map(|v| to_f64(*v)).find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoupling(bad));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuenchKind {
    H0,
    H1,
    H2,
    H3,
    H4,
    H5,
}

impl FromStr for QuenchKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "H0" => Ok(QuenchKind::H0),
            "H1" => Ok(QuenchKind::H1),
            "H2" => Ok(QuenchKind::H2),
            "H3" => Ok(QuenchKind::H3),
            "H4" => Ok(QuenchKind::H4),
            "H5" => Ok(QuenchKind::H5),
            _ => Err(Error::UnknownSpec(s.trim().to_string())),
        }
    }
}

impl fmt::Display for QuenchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// A quench Hamiltonian by name. All terms carry a negative sign.
///
/// * `H0 = -sum A_s - sum B_p`
/// * `H1 = -sum h_i S_i`
/// * `H2 = -sum J_ij S_i S_j` over neighbour pairs
/// * `H3 = -J1 sum Z_i - J2 sum X_i X_j`
/// * `H4 = H0 - h sum Z_i`
/// * `H5 = H0 - J1 sum Z_i - J2 sum X_i X_j`
#[derive(Debug, Clone, PartialEq)]
pub enum QuenchSpec<T: Real> {
    H0,
    H1 { basis: PauliBasis, h: Couplings<T> },
    H2 { basis: PauliBasis, j: Couplings<T> },
    H3 { j1: T, j2: T },
    H4 { h: T },
    H5 { j1: T, j2: T },
}

impl<T: Real> QuenchSpec<T> {
    pub fn kind(&self) -> QuenchKind {
        match self {
            QuenchSpec::H0 => QuenchKind::H0,
            QuenchSpec::H1 { .. } => QuenchKind::H1,
            QuenchSpec::H2 { .. } => QuenchKind::H2,
            QuenchSpec::H3 { .. } => QuenchKind::H3,
            QuenchSpec::H4 { .. } => QuenchKind::H4,
            QuenchSpec::H5 { .. } => QuenchKind::H5,
        }
    }

    /// True when every eigenvector is a single-basis spin flip of the vacuum.
    pub fn is_single_basis(&self) -> bool {
        matches!(self, QuenchSpec::H1 { .. } | QuenchSpec::H2 { .. })
    }
}

struct Compiled<T> {
    diag: Vec<T>,
    /// Off-diagonal terms grouped by flip mask: `(xmask, [(zmask, coeff)])`.
    groups: Vec<(u64, Vec<(u64, T)>)>,
}

/// A weighted sum of Pauli strings with a matrix-free `matvec`.
pub struct HamiltonianOp<T: Real> {
    num_spins: usize,
    terms: Vec<PauliString<T>>,
    compiled: OnceLock<Compiled<T>>,
}

impl<T: Real> Clone for HamiltonianOp<T> {
    fn clone(&self) -> Self {
        HamiltonianOp { num_spins: self.num_spins, terms: self.terms.clone(), compiled: OnceLock::new() }
    }
}

impl<T: Real> fmt::Debug for HamiltonianOp<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianOp")
            .field("num_spins", &self.num_spins)
            .field("terms", &self.terms.len())
            .finish()
    }
}

impl<T: Real> HamiltonianOp<T> {
    pub fn new(num_spins: usize, terms: Vec<PauliString<T>>) -> Result<Self> {
        if num_spins > crate::state::MAX_STATE_SPINS {
            return Err(Error::SizeLimit {
                what: "Hamiltonian",
                requested: num_spins,
                limit: crate::state::MAX_STATE_SPINS,
            });
        }
        for t in &terms {
            if t.span() > num_spins {
                return Err(Error::DimensionMismatch { expected: num_spins, found: t.span() });
            }
            PauliString::new(t.xmask, t.zmask, t.coeff)?;
        }
        Ok(HamiltonianOp { num_spins, terms, compiled: OnceLock::new() })
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    pub fn dim(&self) -> usize {
        1 << self.num_spins
    }

    pub fn terms(&self) -> &[PauliString<T>] {
        &self.terms
    }

    /// Upper bound on the spectral radius.
    pub fn norm_bound(&self) -> T {
        self.terms.iter().fold(T::zero(), |acc, t| acc + t.coeff.abs())
    }

    fn compiled(&self) -> &Compiled<T> {
        self.compiled.get_or_init(|| {
            let dim = self.dim();
            let diag_terms: Vec<&PauliString<T>> = self.terms.iter().filter(|t| t.xmask == 0).collect();
            let mut diag = vec![T::zero(); dim];
            diag.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
                let base = (ci * CHUNK) as u64;
                for (k, d) in chunk.iter_mut().enumerate() {
                    let b = base + k as u64;
                    *d = diag_terms.iter().fold(T::zero(), |acc, t| acc + t.sign(b));
                }
            });
            let mut groups: Vec<(u64, Vec<(u64, T)>)> = Vec::new();
            for t in self.terms.iter().filter(|t| t.xmask != 0) {
                match groups.iter_mut().find(|(x, _)| *x == t.xmask) {
                    Some((_, zs)) => zs.push((t.zmask, t.coeff)),
                    None => groups.push((t.xmask, vec![(t.zmask, t.coeff)])),
                }
            }
            Compiled { diag, groups }
        })
    }

    /// Diagonal matrix elements in the Z basis.
    pub fn diagonal(&self) -> &[T] {
        &self.compiled().diag
    }

    /// `Tr H`, exact from the diagonal.
    pub fn trace(&self) -> T {
        self.diagonal().iter().fold(T::zero(), |acc, d| acc + *d)
    }

    /// `out = H psi` on raw amplitude slices; each output chunk is written by one task.
    pub fn apply_into(&self, psi: &[Complex<T>], out: &mut [Complex<T>]) -> Result<()> {
        if psi.len() != self.dim() || out.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: psi.len().min(out.len()) });
        }
        let comp = self.compiled();
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, oc)| {
            let base = ci * CHUNK;
            for (k, o) in oc.iter_mut().enumerate() {
                *o = psi[base + k].scale(comp.diag[base + k]);
            }
            for (x, zs) in &comp.groups {
                let x = *x as usize;
                for (k, o) in oc.iter_mut().enumerate() {
                    let b = base + k;
                    let w = zs.iter().fold(T::zero(), |acc, &(z, c)| {
                        if (b as u64 & z).count_ones() % 2 == 0 {
                            acc + c
                        } else {
                            acc - c
                        }
                    });
                    *o += psi[b ^ x].scale(w);
                }
            }
        });
        Ok(())
    }

    pub fn matvec(&self, psi: &StateVector<T>) -> Result<Vec<Complex<T>>> {
        let mut out = vec![czero(); self.dim()];
        self.apply_into(psi.amplitudes(), &mut out)?;
        Ok(out)
    }

    /// `<psi|H|psi>` for a normalized state.
    pub fn expectation(&self, psi: &StateVector<T>) -> Result<T> {
        require_normalized(psi)?;
        let hpsi = self.matvec(psi)?;
        Ok(dotc(psi.amplitudes(), &hpsi).re)
    }

    /// Column-major dense matrix, for `N <= 14`.
    pub fn to_dense(&self) -> Result<Vec<T>> {
        if self.num_spins > DENSE_MAX_SPINS {
            return Err(Error::SizeLimit {
                what: "dense matrix (use the Krylov propagator)",
                requested: self.num_spins,
                limit: DENSE_MAX_SPINS,
            });
        }
        let dim = self.dim();
        let comp = self.compiled();
        let mut m = vec![T::zero(); dim * dim];
        m.par_chunks_mut(dim).enumerate().for_each(|(col, column)| {
            column[col] = comp.diag[col];
            for (x, zs) in &comp.groups {
                let row = col ^ *x as usize;
                for &(z, c) in zs {
                    let s = if (row as u64 & z).count_ones() % 2 == 0 { c } else { -c };
                    column[row] += s;
                }
            }
        });
        Ok(m)
    }
}

fn stabilizer_terms<T: Real>(lat: &EdgeLattice) -> Vec<PauliString<T>> {
    let one = T::one();
    let mut terms: Vec<PauliString<T>> = lat
        .stars()
        .iter()
        .map(|s| PauliString { xmask: s.mask(), zmask: 0, coeff: -one })
        .collect();
    terms.extend(lat.plaquettes().iter().map(|p| PauliString { xmask: 0, zmask: p.mask(), coeff: -one }));
    terms
}

fn field_terms<T: Real>(basis: PauliBasis, values: &[T]) -> Vec<PauliString<T>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &h)| match basis {
            PauliBasis::X => PauliString::x(i, -h),
            PauliBasis::Z => PauliString::z(i, -h),
        })
        .collect()
}

fn pair_terms<T: Real>(basis: PauliBasis, pairs: &[(usize, usize)], values: &[T]) -> Vec<PauliString<T>> {
    pairs
        .iter()
        .zip(values)
        .map(|(&(i, j), &c)| {
            let m = (1u64 << i) | (1u64 << j);
            match basis {
                PauliBasis::X => PauliString { xmask: m, zmask: 0, coeff: -c },
                PauliBasis::Z => PauliString { xmask: 0, zmask: m, coeff: -c },
            }
        })
        .collect()
}

pub fn build_hamiltonian<T: Real>(spec: &QuenchSpec<T>, lat: &EdgeLattice) -> Result<HamiltonianOp<T>> {
    let n = lat.num_spins();
    let terms = match spec {
        QuenchSpec::H0 => stabilizer_terms(lat),
        QuenchSpec::H1 { basis, h } => field_terms(*basis, &h.resolve(n)?),
        QuenchSpec::H2 { basis, j } => {
            let pairs = lat.neighbor_pairs();
            pair_terms(*basis, &pairs, &j.resolve(pairs.len())?)
        }
        QuenchSpec::H3 { j1, j2 } => {
            let pairs = lat.neighbor_pairs();
            let mut t = field_terms(PauliBasis::Z, &vec![*j1; n]);
            t.extend(pair_terms(PauliBasis::X, &pairs, &vec![*j2; pairs.len()]));
            t
        }
        QuenchSpec::H4 { h } => {
            let mut t = stabilizer_terms(lat);
            if *h != T::zero() {
                t.extend(field_terms(PauliBasis::Z, &vec![*h; n]));
            }
            t
        }
        QuenchSpec::H5 { j1, j2 } => {
            let pairs = lat.neighbor_pairs();
            let mut t = stabilizer_terms(lat);
            t.extend(field_terms(PauliBasis::Z, &vec![*j1; n]));
            t.extend(pair_terms(PauliBasis::X, &pairs, &vec![*j2; pairs.len()]));
            t
        }
    };
    HamiltonianOp::new(n, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stabilizer::{enumerate_group, ground_state, sector_state, SectorLabel};

    type C = Complex<f64>;

    // Dense oracle built from Kronecker products of 2x2 Pauli matrices.
    // Spin k is bit k of the index, so it is the k-th factor from the right.
    fn kron(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (ra, rb) = (a.len(), b.len());
        let mut out = vec![vec![0.0; ra * rb]; ra * rb];
        for i in 0..ra {
            for j in 0..ra {
                for k in 0..rb {
                    for l in 0..rb {
                        out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                    }
                }
            }
        }
        out
    }

    fn pauli_dense(n: usize, x: u64, z: u64) -> Vec<Vec<f64>> {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let px = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let pz = vec![vec![1.0, 0.0], vec![0.0, -1.0]];
        let pzx = vec![vec![0.0, 1.0], vec![-1.0, 0.0]];
        let mut m = vec![vec![1.0]];
        for k in (0..n).rev() {
            let f = match ((x >> k) & 1, (z >> k) & 1) {
                (0, 0) => &id,
                (1, 0) => &px,
                (0, 1) => &pz,
                _ => &pzx,
            };
            m = kron(&m, f);
        }
        m
    }

    fn dense_oracle(h: &HamiltonianOp<f64>) -> Vec<Vec<f64>> {
        let dim = h.dim();
        let mut m = vec![vec![0.0; dim]; dim];
        for t in h.terms() {
            let p = pauli_dense(h.num_spins(), t.xmask(), t.zmask());
            for i in 0..dim {
                for j in 0..dim {
                    m[i][j] += t.coeff() * p[i][j];
                }
            }
        }
        m
    }

    fn lat22() -> EdgeLattice {
        EdgeLattice::new(2, 2).unwrap()
    }

    fn test_state(n: usize, salt: f64) -> StateVector<f64> {
        let amps = (0..1usize << n)
            .map(|k| C::new((k as f64 * 0.731 + salt).sin(), (k as f64 * 1.37 - salt).cos()))
            .collect();
        StateVector::normalized(n, amps).unwrap()
    }

    #[test]
    fn single_qubit_actions() {
        let vac = StateVector::<f64>::vacuum(3).unwrap();
        let out = pauli_apply(&PauliString::x(0, 1.0), &vac).unwrap();
        assert_eq!(out[1], C::new(1.0, 0.0));
        let one = StateVector::<f64>::basis(3, 1).unwrap();
        let out = pauli_apply(&PauliString::z(0, 1.0), &one).unwrap();
        assert_eq!(out[1], C::new(-1.0, 0.0));
    }

    #[test]
    fn loop_string_is_involution() {
        let l = EdgeLattice::new(2, 3).unwrap();
        let w = PauliString::new(l.loop_edges(crate::Direction::Vertical).mask(), 0, 1.0).unwrap();
        let psi = test_state(12, 0.2);
        let once = StateVector::from_raw(12, pauli_apply(&w, &psi).unwrap());
        let twice = pauli_apply(&w, &once).unwrap();
        assert_eq!(twice, psi.amplitudes());
    }

    #[test]
    fn rejects_odd_overlap_and_oversized_terms() {
        assert!(matches!(PauliString::new(1, 1, 1.0), Err(Error::NonHermitianTerm)));
        assert!(PauliString::new(3, 3, 1.0).is_ok());
        assert!(PauliString::new(1, 0, f64::NAN).is_err());
        let psi = StateVector::<f64>::vacuum(2).unwrap();
        assert!(pauli_apply(&PauliString::x(5, 1.0), &psi).is_err());
    }

    #[test]
    fn unknown_spec_and_coupling_length() {
        assert!(matches!("H7".parse::<QuenchKind>(), Err(Error::UnknownSpec(_))));
        assert_eq!("h3".parse::<QuenchKind>().unwrap(), QuenchKind::H3);
        let spec = QuenchSpec::H1 { basis: PauliBasis::Z, h: Couplings::Explicit(vec![1.0; 3]) };
        assert!(matches!(
            build_hamiltonian(&spec, &lat22()),
            Err(Error::CouplingLength { expected: 8, found: 3 })
        ));
    }

    #[test]
    fn disorder_is_seeded_and_bounded() {
        let c = Couplings::Disordered { mean: 1.0, width: 0.5, seed: 7 };
        let a = c.resolve(20).unwrap();
        assert_eq!(a, c.resolve(20).unwrap());
        assert!(a.iter().all(|v| (0.5..1.5).contains(v)));
        let d = Couplings::Disordered { mean: 1.0, width: 0.5, seed: 8 }.resolve(20).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn h4_at_zero_field_is_h0() {
        let a = build_hamiltonian::<f64>(&QuenchSpec::H0, &lat22()).unwrap();
        let b = build_hamiltonian::<f64>(&QuenchSpec::H4 { h: 0.0 }, &lat22()).unwrap();
        assert_eq!(a.terms(), b.terms());
    }

    #[test]
    fn matvec_matches_kronecker_oracle() {
        let l = lat22();
        let specs = vec![
            QuenchSpec::H0,
            QuenchSpec::H1 { basis: PauliBasis::X, h: Couplings::Disordered { mean: 1.0, width: 0.3, seed: 1 } },
            QuenchSpec::H2 { basis: PauliBasis::Z, j: Couplings::Uniform(0.7) },
            QuenchSpec::H3 { j1: 0.33, j2: 1.0 },
            QuenchSpec::H4 { h: 0.34 },
            QuenchSpec::H5 { j1: 0.2, j2: 0.5 },
        ];
        let psi = test_state(8, 0.4);
        for spec in specs {
            let h = build_hamiltonian(&spec, &l).unwrap();
            let oracle = dense_oracle(&h);
            let got = h.matvec(&psi).unwrap();
            for i in 0..256 {
                let want: C = (0..256).map(|j| psi.amplitudes()[j] * oracle[i][j]).sum();
                assert!((got[i] - want).norm() < 1e-12, "{spec:?} row {i}");
            }
            let dense = h.to_dense().unwrap();
            for i in 0..256 {
                for j in 0..256 {
                    assert!((dense[j * 256 + i] - oracle[i][j]).abs() < 1e-12);
                    assert_eq!(dense[j * 256 + i], dense[i * 256 + j]);
                }
            }
            let tr: f64 = (0..256).map(|i| oracle[i][i]).sum();
            assert!((h.trace() - tr).abs() < 1e-9);
        }
    }

    #[test]
    fn ground_state_energy_and_stabilizers() {
        for (m, n) in [(2, 2), (2, 3)] {
            let l = EdgeLattice::new(m, n).unwrap();
            let g = enumerate_group(&l).unwrap();
            let psi = ground_state::<f64>(&l, &g).unwrap();
            let h0 = build_hamiltonian(&QuenchSpec::H0, &l).unwrap();
            let e = h0.expectation(&psi).unwrap();
            assert!((e + 2.0 * (m * n) as f64).abs() < 1e-12);
            let hpsi = h0.matvec(&psi).unwrap();
            for (a, b) in hpsi.iter().zip(psi.amplitudes()) {
                assert!((a + b * (2 * m * n) as f64).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn h1_expectation_on_ground_state() {
        let l = lat22();
        let g = enumerate_group(&l).unwrap();
        let psi = ground_state::<f64>(&l, &g).unwrap();
        let h1 = build_hamiltonian(&QuenchSpec::H1 { basis: PauliBasis::Z, h: Couplings::Uniform(1.0) }, &l).unwrap();
        let n = l.num_spins() as f64;
        let oracle: f64 =
            g.masks().iter().map(|&x| -(n - 2.0 * x.count_ones() as f64)).sum::<f64>() / g.order() as f64;
        assert!((h1.expectation(&psi).unwrap() - oracle).abs() < 1e-12);
        assert!(oracle.abs() < 1e-12);
    }

    #[test]
    fn expectation_requires_normalization() {
        let h = build_hamiltonian::<f64>(&QuenchSpec::H0, &lat22()).unwrap();
        let bad = StateVector::from_raw(8, vec![C::new(0.5, 0.0); 256]);
        assert!(matches!(h.expectation(&bad), Err(Error::Unnormalized { .. })));
    }

    #[test]
    fn zero_state_maps_to_zero() {
        let h = build_hamiltonian::<f64>(&QuenchSpec::H3 { j1: 0.3, j2: 1.0 }, &lat22()).unwrap();
        let mut out = vec![C::new(1.0, 1.0); 256];
        h.apply_into(&vec![C::new(0.0, 0.0); 256], &mut out).unwrap();
        assert!(out.iter().all(|z| *z == C::new(0.0, 0.0)));
    }

    #[test]
    fn single_basis_quenches_have_basis_eigenvectors() {
        let l = lat22();
        for spec in [
            QuenchSpec::H1 { basis: PauliBasis::Z, h: Couplings::Disordered { mean: 1.0, width: 0.5, seed: 3 } },
            QuenchSpec::H2 { basis: PauliBasis::Z, j: Couplings::Uniform(1.0) },
        ] {
            let h = build_hamiltonian(&spec, &l).unwrap();
            for b in [0usize, 5, 77, 255] {
                let e = StateVector::<f64>::basis(8, b).unwrap();
                let out = h.matvec(&e).unwrap();
                for (k, z) in out.iter().enumerate() {
                    if k != b {
                        assert_eq!(*z, C::new(0.0, 0.0));
                    }
                }
            }
        }
        // X-basis quench: sector states are superpositions of X eigenvectors,
        // so check the commutator with every star and plaquette instead.
        let h = build_hamiltonian(&QuenchSpec::H2 { basis: PauliBasis::X, j: Couplings::Uniform(1.0) }, &l).unwrap();
        let g = enumerate_group(&l).unwrap();
        let s = sector_state::<f64>(&l, &g, &SectorLabel::pure(1, 0)).unwrap();
        let hs = StateVector::from_raw(8, h.matvec(&s).unwrap());
        for star in l.stars() {
            let a = PauliString::new(star.mask(), 0, 1.0).unwrap();
            let lhs = pauli_apply(&a, &hs).unwrap();
            let rhs = h.matvec(&StateVector::from_raw(8, pauli_apply(&a, &s).unwrap())).unwrap();
            for (x, y) in lhs.iter().zip(&rhs) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn h0_commutes_with_loop_operators() {
        let l = EdgeLattice::new(2, 3).unwrap();
        let h = build_hamiltonian::<f64>(&QuenchSpec::H0, &l).unwrap();
        let psi = test_state(12, 1.1);
        // X strings on the dual loops, Z strings on direct-lattice cycles.
        let row: u64 = (0..3).map(|c| 1u64 << l.horizontal(0, c)).sum();
        let col: u64 = (0..2).map(|r| 1u64 << l.vertical(r, 0)).sum();
        let w1 = l.loop_edges(crate::Direction::Vertical).mask();
        let w2 = l.loop_edges(crate::Direction::Horizontal).mask();
        for (x, z) in [(w1, 0), (w2, 0), (0, row), (0, col)] {
            {
                let w = PauliString::new(x, z, 1.0).unwrap();
                let a = pauli_apply(&w, &StateVector::from_raw(12, h.matvec(&psi).unwrap())).unwrap();
                let b = h.matvec(&StateVector::from_raw(12, pauli_apply(&w, &psi).unwrap())).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn f32_backend_agrees_with_f64() {
        let l = lat22();
        let h64 = build_hamiltonian::<f64>(&QuenchSpec::H3 { j1: 0.33, j2: 1.0 }, &l).unwrap();
        let h32 = build_hamiltonian::<f32>(&QuenchSpec::H3 { j1: 0.33, j2: 1.0 }, &l).unwrap();
        assert!((h64.trace() - h32.trace() as f64).abs() < 1e-4);
        assert!((h64.norm_bound() - h32.norm_bound() as f64).abs() < 1e-4);
    }
}
