//! Simulator for a central qubit coupled to a star of `N` non-interacting bath
//! qubits, with an untouched ancilla used to probe memory effects.
//!
//! The ancilla and system start in the Bell state `(|00⟩ + |11⟩)/√2`, the bath
//! starts in a product thermal state, and the exchange Hamiltonian moves a
//! single excitation between the system and the bath sites. The crate computes
//! the reduced ancilla–system state three ways:
//!
//! * [`propagate::brute_force_propagate`]: full `2^(N+2)` density matrix, the reference oracle;
//! * [`propagate::propagate_active`] + [`propagate::assemble_rho_as`]: the `(N+1)`-dimensional
//!   single-excitation subspace, polynomial in `N`;
//! * [`propagate::closed_form_rho_as`]: analytic state for commuting couplings.
//!
//! [`witness`] turns state series into negativity traces, looks for revivals of
//! entanglement and bisects coupling parameters for the value where revivals
//! stop.
//!
//! Conventions: `ħ = 1`; tensor factors are ordered ancilla ⊗ system ⊗ bath
//! sites `1..=N`, with the leftmost factor most significant in flat indices.

pub mod densemath;
pub mod error;
pub mod model;
pub mod propagate;
pub mod tolerances;
pub mod witness;

pub use error::{Error, Result};
pub use tolerances::Tolerances;

pub use num_complex::Complex64;
