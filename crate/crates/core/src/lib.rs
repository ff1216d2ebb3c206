//! Coherent-state transition amplitudes and partition functions of the
//! quantum Rabi model, computed along three independent routes:
//!
//! * [`fock`]: truncated Fock-space diagonalization (the reference values),
//! * [`trotter`]: finite-n Trotterized evolution, its branching recurrence and
//!   the equivalent complex Ising configuration sums,
//! * [`domain_wall`]: the continuum series in the two-level splitting `ω0`,
//!   with Monte Carlo averages over domain-wall positions.
//!
//! All routes share the parameter and coherent-label types from [`model`].

pub mod domain_wall;
pub mod error;
pub mod fock;
pub mod model;
pub mod numeric;
pub mod trotter;

pub use error::{RabiError, Result};
pub use model::{coherent_overlap, CoherentLabel, Parity, RabiParams, Tolerances};

pub use num_complex::Complex64 as C64;
