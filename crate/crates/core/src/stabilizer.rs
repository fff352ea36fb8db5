//! The Abelian group of star products, toric-code sector states, and the
//! closed-form entropy and overlap expressions that hold for flip-group
//! states.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lattice::{full_mask, Direction, EdgeLattice, Region};
use crate::scalar::{czero, norm_sqr, real, to_f64, Real};
use crate::state::StateVector;

/// Largest vertex count whose star group is enumerated explicitly.
pub const MAX_GROUP_VERTICES: usize = 25;

/// All `2^(mn-1)` X-flip patterns generated by star operators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipGroup {
    num_spins: usize,
    generators: Vec<u64>,
    masks: Vec<u64>,
}

impl FlipGroup {
    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    /// Star masks for every vertex except `(m-1, n-1)`.
    pub fn generators(&self) -> &[u64] {
        &self.generators
    }

    /// Group elements; element `k` is the XOR of generators at the set bits of `k`.
    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn order(&self) -> usize {
        self.masks.len()
    }

    /// `|G_A|`: elements supported inside `region`.
    pub fn count_inside(&self, region: &Region) -> usize {
        let outside = !region.mask();
        self.masks.iter().filter(|&&g| g & outside == 0).count()
    }

    /// `|G_B|`: elements acting trivially on `region`.
    pub fn count_outside(&self, region: &Region) -> usize {
        self.masks.iter().filter(|&&g| g & region.mask() == 0).count()
    }
}

pub fn enumerate_group(lat: &EdgeLattice) -> Result<FlipGroup> {
    if lat.num_vertices() > MAX_GROUP_VERTICES {
        return Err(Error::SizeLimit {
            what: "star group",
            requested: lat.num_spins(),
            limit: 2 * MAX_GROUP_VERTICES,
        });
    }
    let stars = lat.stars();
    let generators: Vec<u64> = stars[..stars.len() - 1].iter().map(Region::mask).collect();
    let mut masks = Vec::with_capacity(1 << generators.len());
    masks.push(0u64);
    for &g in &generators {
        let extended: Vec<u64> = masks.iter().map(|&x| x ^ g).collect();
        masks.extend(extended);
    }
    Ok(FlipGroup { num_spins: lat.num_spins(), generators, masks })
}

/// Which ground state of the four-dimensional toric-code manifold to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SectorLabel<T: Real> {
    /// `w1^i w2^j |Psi0>`.
    Pure { i: bool, j: bool },
    /// `sum_ij alpha_ij w1^i w2^j |Psi0>`, amplitudes ordered `00, 01, 10, 11`.
    Superposition([Complex<T>; 4]),
}

impl<T: Real> SectorLabel<T> {
    pub fn pure(i: u8, j: u8) -> Self {
        SectorLabel::Pure { i: i != 0, j: j != 0 }
    }
}

/// Builds `|G|^{-1/2} sum_g g |0>`.
pub fn ground_state<T: Real>(lat: &EdgeLattice, grp: &FlipGroup) -> Result<StateVector<T>> {
    sector_state(lat, grp, &SectorLabel::Pure { i: false, j: false })
}

pub fn sector_state<T: Real>(
    lat: &EdgeLattice,
    grp: &FlipGroup,
    sec: &SectorLabel<T>,
) -> Result<StateVector<T>> {
    if grp.num_spins() != lat.num_spins() {
        return Err(Error::DimensionMismatch { expected: lat.num_spins(), found: grp.num_spins() });
    }
    let n = lat.num_spins();
    if n > crate::state::MAX_STATE_SPINS {
        return Err(Error::SizeLimit { what: "state vector", requested: n, limit: crate::state::MAX_STATE_SPINS });
    }
    let w1 = lat.loop_edges(Direction::Vertical).mask();
    let w2 = lat.loop_edges(Direction::Horizontal).mask();
    let weights: [Complex<T>; 4] = match *sec {
        SectorLabel::Pure { i, j } => {
            let mut w = [czero(); 4];
            w[2 * i as usize + j as usize] = Complex::new(T::one(), T::zero());
            w
        }
        SectorLabel::Superposition(alpha) => {
            let total = to_f64(alpha.iter().fold(T::zero(), |acc, a| acc + norm_sqr(*a)));
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Unnormalized { norm: total.sqrt() });
            }
            alpha
        }
    };
    let amp = T::one() / real::<T>(grp.order() as f64).sqrt();
    let mut amps = vec![czero(); 1 << n];
    for (k, w) in weights.iter().enumerate() {
        if *w == czero() {
            continue;
        }
        let shift = if k & 2 != 0 { w1 } else { 0 } ^ if k & 1 != 0 { w2 } else { 0 };
        for &g in grp.masks() {
            amps[(g ^ shift) as usize] += w.scale(amp);
        }
    }
    Ok(StateVector::from_raw(n, amps))
}

/// True when every loop operator `w1`, `w2`, `w1 w2` can be multiplied by a
/// group element so that it acts only outside `region`; the four sector
/// states then have identical reductions to `region`.
pub fn sectors_locally_identical(lat: &EdgeLattice, grp: &FlipGroup, region: &Region) -> bool {
    let w1 = lat.loop_edges(Direction::Vertical).mask();
    let w2 = lat.loop_edges(Direction::Horizontal).mask();
    [w1, w2, w1 ^ w2]
        .iter()
        .all(|&w| grp.masks().iter().any(|&g| (w ^ g) & region.mask() == 0))
}

/// `log2(|G| / (|G_A| |G_B|))` in bits.
pub fn analytic_region_entropy(grp: &FlipGroup, region: &Region) -> Result<f64> {
    let full = full_mask(grp.num_spins());
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if region.mask() & full == full {
        return Err(Error::FullRegion);
    }
    let inside = grp.count_inside(region) as f64;
    let outside = grp.count_outside(region) as f64;
    Ok((grp.order() as f64 / (inside * outside)).log2())
}

/// `|G|^{-1} |sum_g cos(E(g) t)|`.
///
/// Equals `|<Psi0|Psi(t)>|` for a Hamiltonian diagonal in the flip basis whose
/// energies over the group come in `+/-` pairs (or whenever the sine sum
/// vanishes).
pub fn analytic_overlap<T: Real>(grp: &FlipGroup, energy: impl Fn(u64) -> T, t: T) -> T {
    let sum = grp
        .masks()
        .iter()
        .fold(T::zero(), |acc, &g| acc + (energy(g) * t).cos());
    sum.abs() / real::<T>(grp.order() as f64)
}
