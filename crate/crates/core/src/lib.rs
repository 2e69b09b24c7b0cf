//! Simulation of star-topology nuclear-spin registers used as entangled
//! magnetic-field sensors under controlled noise.
//!
//! The crate is organised bottom-up:
//!
//! * [`spin`]: spin rosters, Pauli embeddings and density matrices.
//! * [`hamiltonian`]: the secular ZZ Hamiltonian in diagonal form.
//! * [`gates`]: ideal rotations, virtual-Z frames and the pseudo-CNOT.
//! * [`noise`]: sample calibration, decoupling and the Trotterised
//!   flip-flop evolution engine.
//! * [`pulseprog`]: the pulse-program language: parser, printer,
//!   expander and built-in sequences.
//! * [`sim`]: the interpreter that runs a program on a register.
//! * [`acquisition`]: FIDs, spectra, peak phases, decay fits and the
//!   closed-form signal models.
//! * [`experiments`]: the four reproducible experiment families plus
//!   CSV/SVG output.

pub mod acquisition;
pub mod error;
pub mod experiments;
pub mod gates;
pub mod hamiltonian;
pub mod noise;
pub mod pulseprog;
pub mod sim;
pub mod spin;

pub use error::{Error, Result};
pub use num_complex::Complex64;
