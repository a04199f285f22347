//! Simulator for a two-qubit / quantum-rotor hybrid thermal machine.
//!
//! Two qubits, each attached to its own bosonic heat bath, exchange an
//! excitation while kicking a planar rotor by one quantum of angular
//! momentum. A dissipative load on the rotor draws work. The crate builds the
//! operators and Lindblad generators for a local and a global master
//! equation, finds steady states and time evolution, and evaluates heat,
//! work, ergotropy and rectification figures of merit. A collision-model
//! microscopic derivation is provided as a cross-check of the local model.

pub mod collision;
pub mod dynamics;
pub mod error;
pub mod gme;
pub mod linalg;
pub mod liouvillian;
pub mod model;
pub mod operators;
pub mod rectify;
pub mod sparse;
pub mod thermo;

pub use error::{Error, Result};
pub use model::{build_hamiltonians, gibbs_state, thermal_occupation, Hamiltonians, OmegaCutoff, Params, Spectrum};
pub use operators::{make_space, QOperator, SpaceSpec};
