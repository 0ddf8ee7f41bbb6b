//! Numerical substrate: dense complex matrices, tensor products, partial
//! traces, Hermitian spectral calculus and seeded random generators.

mod matrix;
pub mod random;
mod space;
mod spectral;

pub use matrix::{inner, pauli, vector_norm, ComplexMatrix, C64, ONE, ZERO};
pub use random::{random_density, random_hermitian, random_state_vector, random_unitary};
pub use space::{embed, kron, kron_all, kron_vec, partial_trace, CompositeSpace, Split};
pub use spectral::{
    hermitian_rank, hermitian_spectrum, hermitian_spectrum_with, unitary_exp, von_neumann_entropy,
    von_neumann_entropy_with, Spectrum,
};
pub(crate) use spectral::entropy_of_eigenvalues;
