//! Low-rank matrix recovery from random Pauli measurements.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! pieces: Pauli observables in symplectic form, the normalized Pauli
//! sampling operator, measurement noise models, nuclear-norm recovery
//! solvers (matrix Lasso and matrix Dantzig selector), and empirical
//! restricted-isometry and error-bound diagnostics. File formats, the
//! experiment driver and the CLI live in `pauli-tomo-harness`.
//!
//! Randomness is always passed in as an explicit `u64` seed and expanded with
//! ChaCha8, so every routine is a pure function of its arguments.
#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
mod error;
pub mod matrix;
pub mod noise;
pub mod pauli;
pub mod sampling;
pub mod solvers;

pub use error::{Error, Result};
pub use matrix::{CMatrix, DensityMatrix, HermitianMatrix, SpectralSplit};
pub use noise::{MeasurementRecord, NoiseModel};
pub use pauli::PauliLabel;
pub use sampling::SamplingOperator;
pub use solvers::{RecoveryResult, SolverConfig, StepRule};

pub use num_complex::Complex64;

/// Seeded generator used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build the crate's generator from a `u64` seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    <Rng as rand::SeedableRng>::seed_from_u64(seed)
}
