//! Bell-type stochastic particle trajectories for a 1+1 dimensional lattice
//! scalar field theory.
//!
//! The crate builds the Hamiltonian in the particle-configuration basis of a
//! Fock space truncated at two particles, evolves the wave function, and
//! samples configuration jump processes driven by it.

pub mod error;
pub mod evolution;
pub mod experiments;
pub mod fock;
pub mod hamiltonian;
pub mod io;
pub mod jump;
pub mod lattice;
pub mod scalar;
pub mod spectral;
pub mod summation;

pub use error::{Error, Result};
pub use fock::{ConfigIndex, Configuration, SectorIndexer};
pub use lattice::{LatticeSpec, MomentumGrid};
pub use scalar::{Amplitude, Real};

pub type Spec = LatticeSpec<f64>;
pub type Spec32 = LatticeSpec<f32>;
pub type Blocks = hamiltonian::HamiltonianBlocks<f64>;
pub type Blocks32 = hamiltonian::HamiltonianBlocks<f32>;
