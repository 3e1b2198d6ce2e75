//! Simulation of a driven four-level emitter that converts pump photons into
//! bundles of two signal photons.
//!
//! Two independent formalisms are provided and can be checked against each
//! other:
//!
//! - [`lindblad`]: the driven master equation on a truncated Fock space, with
//!   steady states and two-time correlators from the quantum regression theorem.
//! - [`scattering`]: few-photon scattering amplitudes and wavefunctions obtained
//!   by inverting and exponentiating the non-Hermitian Hamiltonian on
//!   fixed-charge subspaces.
//!
//! [`analytic`] collects closed-form rates and populations, [`criterion`]
//! classifies parameter points as photon-pair sources, and [`circuit`] maps a
//! pair of coupled qubits and three resonators onto the model.

pub mod analytic;
pub mod circuit;
pub mod criterion;
mod error;
pub mod fock;
pub mod lindblad;
pub mod measure;
pub mod linalg;
pub mod scattering;

pub use error::{Error, Result};
pub use faer::c64;
pub use fock::{BasisMode, BasisState, FockBasis, Level, SystemParams};
