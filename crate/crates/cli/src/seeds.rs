//! Per-trial seeds and operator fingerprints.
//!
//! A seed is the first 8 bytes (little endian) of
//! `SHA-256("pauli-tomo/seed/v1" ‖ master ‖ cell ‖ trial ‖ stream)`, with every
//! integer encoded as 8 little-endian bytes. Seeds are pure functions of
//! their coordinates, so trials can run in any order or in parallel.

use pauli_tomo_core::SamplingOperator;
use sha2::{Digest, Sha256};

/// Trial coordinate used for the operator shared by a whole cell.
pub const SHARED_TRIAL: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    State = 1,
    Operator = 2,
    Noise = 3,
    Solver = 4,
    Rip = 5,
    Nnq = 6,
}

pub fn derive_seed(master: u64, cell: u64, trial: u64, stream: Stream) -> u64 {
    let mut h = Sha256::new();
    h.update(b"pauli-tomo/seed/v1");
    for v in [master, cell, trial, stream as u64] {
        h.update(v.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// First 16 hex digits of `SHA-256(n ‖ m ‖ index_1 ‖ … ‖ index_m)`.
pub fn fingerprint(op: &SamplingOperator) -> String {
    let mut h = Sha256::new();
    h.update(u64::from(op.num_qubits()).to_le_bytes());
    h.update((op.num_measurements() as u64).to_le_bytes());
    for label in op.labels() {
        h.update(label.index().to_le_bytes());
    }
    h.finalize()[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
