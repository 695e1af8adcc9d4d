//! n-qubit Pauli observables in symplectic (x-mask, z-mask) form.
//!
//! A label with masks `(x, z)` stands for the tensor product whose factor on
//! qubit `k` is `X^{x_k} Z^{z_k}`, with `Y = i X Z` so every label is exactly
//! Hermitian. Qubit 0 is the most significant tensor factor and maps to the
//! most significant bit of the masks and of computational basis indices.
//!
//! The dense matrix of a label has exactly one nonzero per column:
//! `P |b> = i^{|x & z|} (-1)^{|b & z|} |b ^ x>`. All kernels here use that
//! structure so an expectation value costs `O(d)` instead of `O(d^2)`.

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::matrix::CMatrix;
use crate::{Error, Result};

/// Largest qubit count a label can address (`4^n` must fit in a `u64`).
pub const MAX_QUBITS: u32 = 31;

const I_POWERS: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliLabel {
    n: u32,
    x: u64,
    z: u64,
}

impl PauliLabel {
    /// Label for base-4 index `index`; digit `k` (qubit 0 most significant)
    /// selects `0: I, 1: X, 2: Y, 3: Z` on qubit `k`.
    pub fn from_index(n: u32, index: u64) -> Result<Self> {
        check_qubits(n)?;
        if index >= basis_size(n) {
            return Err(Error::IndexOutOfRange { index, n });
        }
        let (mut x, mut z) = (0u64, 0u64);
        for bit in 0..n {
            let digit = (index >> (2 * bit)) & 3;
            let (xb, zb) = match digit {
                0 => (0, 0),
                1 => (1, 0),
                2 => (1, 1),
                _ => (0, 1),
            };
            x |= xb << bit;
            z |= zb << bit;
        }
        Ok(PauliLabel { n, x, z })
    }

    pub fn from_masks(n: u32, x: u64, z: u64) -> Result<Self> {
        check_qubits(n)?;
        let limit = 1u64 << n;
        if x >= limit || z >= limit {
            return Err(Error::param("mask", "mask has bits above the qubit count"));
        }
        Ok(PauliLabel { n, x, z })
    }

    pub fn identity(n: u32) -> Result<Self> {
        Self::from_masks(n, 0, 0)
    }

    /// Inverse of [`PauliLabel::from_index`].
    pub fn index(&self) -> u64 {
        let mut index = 0u64;
        for bit in 0..self.n {
            let xb = (self.x >> bit) & 1;
            let zb = (self.z >> bit) & 1;
            let digit = match (xb, zb) {
                (0, 0) => 0,
                (1, 0) => 1,
                (1, 1) => 2,
                _ => 3,
            };
            index |= digit << (2 * bit);
        }
        index
    }

    pub fn num_qubits(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Number of non-identity tensor factors.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Nonzero entry of column `b`: returns `(row, value)` with row `b ^ x`.
    #[inline]
    pub fn column_entry(&self, b: usize) -> (usize, Complex64) {
        let phase = (self.x & self.z).count_ones() + 2 * ((b as u64) & self.z).count_ones();
        (b ^ self.x as usize, I_POWERS[(phase & 3) as usize])
    }

    /// The unnormalized observable `P_1 ⊗ ... ⊗ P_n` as a dense matrix.
    pub fn dense_matrix(&self) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for b in 0..d {
            let (row, value) = self.column_entry(b);
            out[(row, b)] = value;
        }
        out
    }

    /// `Tr(P† M)` in `O(d)`.
    pub fn expectation(&self, m: &CMatrix) -> Result<Complex64> {
        let d = self.dim();
        check_square(m, d)?;
        Ok(self.expectation_unchecked(m))
    }

    pub(crate) fn expectation_unchecked(&self, m: &CMatrix) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..self.dim() {
            let (row, value) = self.column_entry(b);
            acc += value.conj() * m[(row, b)];
        }
        acc
    }

    /// `out += coeff * P`, again touching only the `d` nonzeros.
    pub(crate) fn accumulate_into(&self, out: &mut CMatrix, coeff: Complex64) {
        for b in 0..self.dim() {
            let (row, value) = self.column_entry(b);
            out[(row, b)] += coeff * value;
        }
    }

    /// Symplectic commutation test.
    pub fn commutes(&self, other: &PauliLabel) -> Result<bool> {
        if self.n != other.n {
            return Err(Error::QubitMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let form = (self.x & other.z).count_ones() + (self.z & other.x).count_ones();
        Ok(form.is_multiple_of(2))
    }
}

/// Parses strings like `"XIZ"`; qubit 0 is the first character.
impl core::str::FromStr for PauliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = u32::try_from(s.len()).map_err(|_| Error::QubitCount(u32::MAX))?;
        check_qubits(n)?;
        let (mut x, mut z) = (0u64, 0u64);
        for (k, c) in s.chars().enumerate() {
            let bit = n - 1 - k as u32;
            let (xb, zb) = match c.to_ascii_uppercase() {
                'I' => (0, 0),
                'X' => (1, 0),
                'Y' => (1, 1),
                'Z' => (0, 1),
                other => {
                    return Err(Error::param(
                        "label",
                        alloc::format!("unknown Pauli factor {other:?}"),
                    ))
                }
            };
            x |= xb << bit;
            z |= zb << bit;
        }
        Self::from_masks(n, x, z)
    }
}

impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.n {
            let bit = self.n - 1 - k;
            let c = match ((self.x >> bit) & 1, (self.z >> bit) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (1, 1) => 'Y',
                _ => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// `4^n`, the number of Pauli labels on `n` qubits.
pub fn basis_size(n: u32) -> u64 {
    1u64 << (2 * n)
}

/// Every label on `n` qubits, in index order.
pub fn all_labels(n: u32) -> Result<Vec<PauliLabel>> {
    check_qubits(n)?;
    (0..basis_size(n))
        .map(|i| PauliLabel::from_index(n, i))
        .collect()
}

pub(crate) fn check_qubits(n: u32) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::QubitCount(n));
    }
    Ok(())
}

pub(crate) fn check_square(m: &CMatrix, d: usize) -> Result<()> {
    if m.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.nrows(),
        });
    }
    if m.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.ncols(),
        });
    }
    Ok(())
}
