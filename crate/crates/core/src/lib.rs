//! Learning sparse k-body Pauli Hamiltonians from simulated time evolution.
//!
//! The pipeline: pick random product bases, reshape the dynamics onto the
//! commuting group `K_beta` of each basis, estimate eigenvalue differences of
//! the resulting commuting Hamiltonian with robust frequency estimation, then
//! recover its sparse coefficient vector by l1 minimization over sampled rows
//! of the weight-k Hadamard matrix.

pub mod csolve;
pub mod dense;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod model;
pub mod pauli;
pub mod rfe;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
pub use model::{EffectiveHamiltonian, SparseHamiltonian};
pub use pauli::{Axis, BasisAxes, BitString, Pauli, PauliString};
