//! Quantization of superconducting circuits.
//!
//! The pipeline runs netlist text through classical circuit matrices, a two-step
//! canonical transformation into harmonic and charge modes, and a sparse
//! Hamiltonian on the truncated Fock ⊗ charge basis. Spectra, phase-space
//! wavefunctions, coupling operators and decoherence rates are derived from it.
//!
//! All internal quantities are SI. Conversion to GHz and friends happens only in
//! [`netlist`] on the way in and in reporting helpers on the way out.

pub mod circuit;
pub mod constants;
pub mod coupling;
pub mod error;
pub mod hamiltonian;
pub mod netlist;
pub mod noise;
pub mod solver;
pub mod sparse;
pub mod special;
pub mod topology;
pub mod transform;
pub mod wavefunction;

pub use circuit::{Circuit, CircuitOptions, Model};
pub use error::{Error, Result};
pub use hamiltonian::{HamiltonianParams, ModeBasis};
pub use netlist::{parse_netlist, CircuitSpec};
pub use solver::{EigenOptions, Spectrum};
pub use sparse::CsrMatrix;
pub use nalgebra;

/// Complex scalar used throughout operator algebra.
pub type C64 = num_complex::Complex64;
