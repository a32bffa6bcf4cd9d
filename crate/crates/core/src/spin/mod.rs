//! Spin Hamiltonians, their diagonalization and EPR transition spectra.

pub mod hamiltonian;
pub mod linalg;
pub mod operators;
pub mod spectrum;

pub use hamiltonian::{build_hamiltonian, FieldConfig, SpinSystem};
pub use linalg::{eigen_solve, eigen_solve_matrix, ComplexMatrix, EigenDecomposition, HermitianMatrix};
pub use operators::{spin_operators, SpinOperators};
pub use spectrum::{transition_spectrum, transition_spectrum_with, SpectrumOptions, SpectrumResult, TransitionLine};
