//! Finite-volume diagnostics for non-Gibbsian transformed and quenched
//! lattice spin measures.

pub mod badness;
pub mod config;
pub mod error;
pub mod exact;
pub mod hamiltonian;
pub mod interaction;
pub mod kac;
pub mod lattice;
pub mod mc;
pub mod meanfield;
pub mod model;
pub mod output;
pub mod quenched;
pub mod stats;
pub mod transform;

pub use config::{Alphabet, BoundaryCondition, Configuration};
pub use error::{Error, Result};
pub use hamiltonian::Hamiltonian;
pub use interaction::{Interaction, PairTerm};
pub use lattice::{Lattice, Site, Sublattice};
pub use model::{CouplingRule, QuenchedOverlay, SpinModel};
