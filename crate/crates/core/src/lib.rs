//! Exact simulation of toric-code ground states on small periodic lattices
//! evolved under quench Hamiltonians, with block entropy, Levin–Wen
//! topological entropy, sector fidelity and overlap recurrences as probes of
//! topological order.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

pub mod entangle;
pub mod error;
pub mod evolve;
pub mod experiment;
pub mod hamiltonian;
pub mod lattice;
pub mod scalar;
pub mod stabilizer;
pub mod state;

pub use error::{Error, Result};
pub use lattice::{Direction, EdgeLattice, LevinWenRegions, Region};
pub use scalar::Real;

pub type StateVector64 = state::StateVector<f64>;
pub type PauliString64 = hamiltonian::PauliString<f64>;
pub type HamiltonianOp64 = hamiltonian::HamiltonianOp<f64>;
pub type QuenchSpec64 = hamiltonian::QuenchSpec<f64>;
pub type Propagator64 = evolve::Propagator<f64>;
pub type TimeSeries64 = evolve::TimeSeries<f64>;
pub type DensityMatrix64 = entangle::DensityMatrix<f64>;
pub type SectorLabel64 = stabilizer::SectorLabel<f64>;

pub type StateVector32 = state::StateVector<f32>;
pub type HamiltonianOp32 = hamiltonian::HamiltonianOp<f32>;
