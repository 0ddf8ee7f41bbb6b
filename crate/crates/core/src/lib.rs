//! Finite-dimensional toolkit for consistent histories and reduced
//! open-system dynamics.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense complex matrices, Kronecker products, partial traces,
//!   Hermitian eigendecomposition and propagators.
//! - [`state`]: validated density operators, projector families and
//!   environment reference states.
//! - [`models`]: desk-scale Hamiltonians and prescribed-unitary models,
//!   schedules and propagators.
//! - [`histories`]: class operators, decoherence matrices, decoherence and
//!   Kolmogorov checks.
//! - [`open_systems`]: reduced dynamics, the linear + affine decomposition of
//!   reduced evolution, chained subsystem decoherence functionals, pointer
//!   ranking and environment redundancy.

pub mod error;
pub mod histories;
pub mod models;
pub mod open_systems;
pub mod state;
pub mod tensor;
pub mod tol;

pub use error::{Error, Result};
pub use tensor::{ComplexMatrix, CompositeSpace, C64};
pub use tol::Tolerances;
