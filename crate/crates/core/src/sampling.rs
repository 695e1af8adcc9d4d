//! The normalized random Pauli sampling operator.
//!
//! With `S_i = P_i / √d` the operator is `A(X)_i = (d/√m) Tr(S_i† X)`,
//! which simplifies to `√(d/m) Tr(P_i X)` because Pauli labels are
//! Hermitian. Its adjoint is `A*(y) = √(d/m) Σ_i y_i P_i`, and
//! `E[A*A] = I` when labels are drawn uniformly with replacement.
//!
//! Everything is matrix-free: each entry of `A(X)` costs `O(d)` through
//! [`PauliLabel::expectation`], and the adjoint scatters `d` nonzeros per
//! label.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng as _;

use crate::matrix::{CMatrix, HermitianMatrix};
use crate::pauli::{self, basis_size, check_qubits, check_square, PauliLabel};
use crate::{rng_from_seed, Error, Result};

/// Largest qubit count accepted by [`SamplingOperator::full_basis`].
pub const MAX_FULL_BASIS_QUBITS: u32 = 8;

/// Imaginary residue tolerated when [`SamplingOperator::forward`] returns a
/// real vector, relative to `max(1, ‖X‖_F)`.
pub const REAL_OUTPUT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingOperator {
    n: u32,
    labels: Vec<PauliLabel>,
}

impl SamplingOperator {
    /// `m` labels drawn iid uniformly from the `4^n` Pauli observables.
    pub fn draw(n: u32, m: usize, seed: u64) -> Result<Self> {
        check_qubits(n)?;
        if m == 0 {
            return Err(Error::param("m", "need at least one measurement"));
        }
        let mut rng = rng_from_seed(seed);
        let total = basis_size(n);
        let labels = (0..m)
            .map(|_| PauliLabel::from_index(n, rng.random_range(0..total)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SamplingOperator { n, labels })
    }

    /// Like [`SamplingOperator::draw`] but rejects repeats, so all `m`
    /// labels are distinct. Requires `m ≤ 4^n`.
    pub fn draw_distinct(n: u32, m: usize, seed: u64) -> Result<Self> {
        check_qubits(n)?;
        let total = basis_size(n);
        if m == 0 || m as u64 > total {
            return Err(Error::param("m", "need 1 ≤ m ≤ 4^n distinct labels"));
        }
        let mut rng = rng_from_seed(seed);
        let mut seen = BTreeSet::new();
        let mut labels = Vec::with_capacity(m);
        while labels.len() < m {
            let index = rng.random_range(0..total);
            if seen.insert(index) {
                labels.push(PauliLabel::from_index(n, index)?);
            }
        }
        Ok(SamplingOperator { n, labels })
    }

    /// All `4^n` labels once each, in index order. Then `A*A = I`.
    pub fn full_basis(n: u32) -> Result<Self> {
        if n > MAX_FULL_BASIS_QUBITS {
            return Err(Error::QubitCount(n));
        }
        Ok(SamplingOperator {
            n,
            labels: pauli::all_labels(n)?,
        })
    }

    pub fn from_labels(labels: Vec<PauliLabel>) -> Result<Self> {
        let first = labels
            .first()
            .ok_or_else(|| Error::param("labels", "need at least one label"))?;
        let n = first.num_qubits();
        for label in &labels {
            if label.num_qubits() != n {
                return Err(Error::QubitMismatch {
                    left: n,
                    right: label.num_qubits(),
                });
            }
        }
        Ok(SamplingOperator { n, labels })
    }

    pub fn from_indices(n: u32, indices: &[u64]) -> Result<Self> {
        let labels = indices
            .iter()
            .map(|&i| PauliLabel::from_index(n, i))
            .collect::<Result<Vec<_>>>()?;
        Self::from_labels(labels)
    }

    pub fn num_qubits(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn num_measurements(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[PauliLabel] {
        &self.labels
    }

    /// `√(d/m)`: the factor relating a Pauli expectation `Tr(P X)` to the
    /// corresponding entry of `A(X)`.
    pub fn entry_scale(&self) -> f64 {
        (self.dim() as f64 / self.num_measurements() as f64).sqrt()
    }

    /// Position of the first repeated label, if any.
    pub fn first_duplicate(&self) -> Option<usize> {
        let mut seen = BTreeSet::new();
        self.labels.iter().position(|l| !seen.insert(*l))
    }

    /// `A(X)` for an arbitrary complex `X`.
    pub fn forward_complex(&self, x: &CMatrix) -> Result<Vec<Complex64>> {
        check_square(x, self.dim())?;
        let scale = self.entry_scale();
        Ok(self
            .labels
            .iter()
            .map(|l| l.expectation_unchecked(x) * scale)
            .collect())
    }

    /// `A(X)` for Hermitian `X`, returned as a real vector.
    ///
    /// Fails if any entry has an imaginary part above
    /// `REAL_OUTPUT_TOL · max(1, ‖X‖_F)`.
    pub fn forward(&self, x: &CMatrix) -> Result<Vec<f64>> {
        let values = self.forward_complex(x)?;
        let tol = REAL_OUTPUT_TOL * x.norm().max(1.0);
        let mut out = Vec::with_capacity(values.len());
        for v in values {
            if v.im.abs() > tol {
                return Err(Error::NotHermitian(v.im.abs()));
            }
            out.push(v.re);
        }
        Ok(out)
    }

    /// Real-part forward map used by the solvers, with no residue check.
    pub(crate) fn forward_real(&self, x: &CMatrix) -> Vec<f64> {
        let scale = self.entry_scale();
        self.labels
            .iter()
            .map(|l| l.expectation_unchecked(x).re * scale)
            .collect()
    }

    /// `A*(y)` for a complex vector.
    pub fn adjoint_complex(&self, y: &[Complex64]) -> Result<CMatrix> {
        self.check_len(y.len())?;
        let d = self.dim();
        let scale = self.entry_scale();
        let mut out = CMatrix::zeros(d, d);
        for (label, &coeff) in self.labels.iter().zip(y) {
            label.accumulate_into(&mut out, coeff * scale);
        }
        Ok(out)
    }

    /// `A*(y)` for a real vector; Hermitian by construction.
    pub fn adjoint(&self, y: &[f64]) -> Result<HermitianMatrix> {
        self.check_len(y.len())?;
        Ok(HermitianMatrix::hermitian_part(&self.adjoint_unchecked(y)))
    }

    pub(crate) fn adjoint_unchecked(&self, y: &[f64]) -> CMatrix {
        let d = self.dim();
        let scale = self.entry_scale();
        let mut out = CMatrix::zeros(d, d);
        for (label, &coeff) in self.labels.iter().zip(y) {
            label.accumulate_into(&mut out, Complex64::new(coeff * scale, 0.0));
        }
        out
    }

    /// `A*A(X) = (d/m) Σ_j Tr(P_j X) P_j`, fused in one pass over the labels.
    pub fn normal_apply(&self, x: &CMatrix) -> Result<CMatrix> {
        check_square(x, self.dim())?;
        Ok(self.normal_unchecked(x))
    }

    pub(crate) fn normal_unchecked(&self, x: &CMatrix) -> CMatrix {
        let d = self.dim();
        let factor = d as f64 / self.num_measurements() as f64;
        let mut out = CMatrix::zeros(d, d);
        for label in &self.labels {
            let coeff = label.expectation_unchecked(x) * factor;
            label.accumulate_into(&mut out, coeff);
        }
        out
    }

    /// Preimage `X = (√m/d) Σ y_i S_i` of `y` under `A`.
    ///
    /// Needs distinct labels so that `A(X) = y` holds exactly. When
    /// `‖y‖₂ ≤ √(d/m)` the preimage also has `‖X‖_* ≤ 1`; outside that
    /// ball the identity still holds but the nuclear-norm bound does not,
    /// which is reported in [`NnqPreimage::within_radius`].
    pub fn nnq_preimage(&self, y: &[f64]) -> Result<NnqPreimage> {
        self.check_len(y.len())?;
        if let Some(pos) = self.first_duplicate() {
            return Err(Error::DuplicateLabels(pos));
        }
        let d = self.dim() as f64;
        let m = self.num_measurements() as f64;
        let radius = self.nnq_radius();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        // (√m/d) · (1/√d) · Σ y_i P_i
        let coeff = m.sqrt() / (d * d.sqrt());
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for (label, &v) in self.labels.iter().zip(y) {
            label.accumulate_into(&mut out, Complex64::new(v * coeff, 0.0));
        }
        Ok(NnqPreimage {
            matrix: HermitianMatrix::hermitian_part(&out),
            y_norm,
            radius,
            within_radius: y_norm <= radius * (1.0 + 1e-12),
        })
    }

    /// `α = √(d/m)`, the radius of the ball covered by nuclear-norm-one
    /// preimages.
    pub fn nnq_radius(&self) -> f64 {
        self.entry_scale()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.num_measurements() {
            return Err(Error::DimensionMismatch {
                expected: self.num_measurements(),
                found: len,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NnqPreimage {
    pub matrix: HermitianMatrix,
    pub y_norm: f64,
    pub radius: f64,
    /// `‖y‖₂ ≤ α`; only then is `‖X‖_* ≤ 1` guaranteed.
    pub within_radius: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{inner, nuclear_norm, random_rank_r_state};
    use alloc::vec;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_complex(d: usize, seed: u64) -> CMatrix {
        let mut rng = rng_from_seed(seed);
        CMatrix::from_fn(d, d, |_, _| {
            c(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        })
    }

    fn random_hermitian(d: usize, seed: u64) -> CMatrix {
        HermitianMatrix::hermitian_part(&random_complex(d, seed)).into_inner()
    }

    // Dense superoperator of A*A acting on column-stacked vec(X), built
    // from the full dense Pauli matrices.
    fn dense_normal_operator(op: &SamplingOperator) -> CMatrix {
        let d = op.dim();
        let m = op.num_measurements() as f64;
        let mut out = CMatrix::zeros(d * d, d * d);
        for label in op.labels() {
            let s = label.dense_matrix().unscale((d as f64).sqrt());
            let v = CMatrix::from_column_slice(d * d, 1, s.as_slice());
            out += (&v * v.adjoint()).scale((d * d) as f64 / m);
        }
        out
    }

    #[test]
    fn draw_range_and_determinism() {
        let op = SamplingOperator::draw(1, 4, 3).unwrap();
        assert_eq!(op.num_measurements(), 4);
        assert!(op.labels().iter().all(|l| l.index() < 4));
        assert_eq!(op, SamplingOperator::draw(1, 4, 3).unwrap());
        assert!(SamplingOperator::draw(1, 0, 3).is_err());
    }

    #[test]
    fn draw_is_uniform() {
        let m = 10_000;
        let op = SamplingOperator::draw(2, m, 8).unwrap();
        let mut counts = [0usize; 16];
        for l in op.labels() {
            counts[l.index() as usize] += 1;
        }
        let expected = m as f64 / 16.0;
        let chi2: f64 = counts
            .iter()
            .map(|&k| (k as f64 - expected).powi(2) / expected)
            .sum();
        // 15 degrees of freedom: mean 15, sd √30; 3 sd above the mean.
        assert!(chi2 < 15.0 + 3.0 * 30f64.sqrt(), "chi2 = {chi2}");
    }

    #[test]
    fn distinct_draw() {
        let op = SamplingOperator::draw_distinct(3, 32, 1).unwrap();
        assert_eq!(op.first_duplicate(), None);
        assert!(SamplingOperator::draw_distinct(1, 5, 1).is_err());
    }

    #[test]
    fn full_basis_labels() {
        let op = SamplingOperator::full_basis(1).unwrap();
        let idx: Vec<u64> = op.labels().iter().map(|l| l.index()).collect();
        assert_eq!(idx, vec![0, 1, 2, 3]);
        assert!(SamplingOperator::full_basis(9).is_err());
    }

    #[test]
    fn full_basis_is_isometric() {
        for n in 1..=3 {
            let op = SamplingOperator::full_basis(n).unwrap();
            for seed in 0..5 {
                let x = random_complex(op.dim(), seed);
                let y = op.forward_complex(&x).unwrap();
                let norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                assert!((norm - x.norm()).abs() < 1e-12 * x.norm().max(1.0));
                let back = op.adjoint_complex(&y).unwrap();
                assert!((back - &x).norm() < 1e-12 * x.norm().max(1.0));
                let normal = op.normal_apply(&x).unwrap();
                assert!((normal - &x).norm() < 1e-12 * x.norm().max(1.0));
            }
        }
    }

    #[test]
    fn full_basis_dense_superoperator_is_identity() {
        for n in 1..=2 {
            let op = SamplingOperator::full_basis(n).unwrap();
            let dense = dense_normal_operator(&op);
            let d2 = op.dim() * op.dim();
            assert!((dense - CMatrix::identity(d2, d2)).norm() < 1e-12);
        }
    }

    #[test]
    fn forward_examples() {
        let op = SamplingOperator::from_indices(1, &[0]).unwrap();
        let y = op.forward(&CMatrix::identity(2, 2)).unwrap();
        assert!((y[0] - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(op.forward(&CMatrix::zeros(2, 2)).unwrap(), vec![0.0]);
        assert!(matches!(
            op.forward(&CMatrix::zeros(4, 4)),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut skew = CMatrix::zeros(2, 2);
        skew[(0, 0)] = c(0.0, 1.0);
        assert!(matches!(op.forward(&skew), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn adjoint_examples() {
        let op = SamplingOperator::from_indices(1, &[3]).unwrap();
        let x = op.adjoint(&[1.0]).unwrap();
        let expected = PauliLabel::from_index(1, 3)
            .unwrap()
            .dense_matrix()
            .scale(2f64.sqrt());
        assert!((x.as_matrix() - expected).norm() < 1e-14);
        assert_eq!(op.adjoint(&[0.0]).unwrap().norm(), 0.0);
        assert!(op.adjoint(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn adjoint_identity() {
        for n in 2..=4u32 {
            let op = SamplingOperator::draw(n, 20 * n as usize, n as u64).unwrap();
            for seed in 0..10 {
                let x = random_complex(op.dim(), 100 + seed);
                let mut rng = rng_from_seed(200 + seed);
                let y: Vec<Complex64> = (0..op.num_measurements())
                    .map(|_| {
                        c(
                            StandardNormal.sample(&mut rng),
                            StandardNormal.sample(&mut rng),
                        )
                    })
                    .collect();
                let ax = op.forward_complex(&x).unwrap();
                let lhs: Complex64 = ax.iter().zip(&y).map(|(a, b)| b.conj() * a).sum();
                let rhs = inner(&op.adjoint_complex(&y).unwrap(), &x);
                assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
            }
        }
    }

    #[test]
    fn normal_apply_matches_dense_superoperator() {
        for (n, m, seed) in [(1, 1, 0), (1, 3, 1), (2, 1, 2), (2, 7, 3)] {
            let op = SamplingOperator::draw(n, m, seed).unwrap();
            let d = op.dim();
            let x = random_complex(d, seed + 10);
            let dense = dense_normal_operator(&op);
            let vx = CMatrix::from_column_slice(d * d, 1, x.as_slice());
            let expected = CMatrix::from_column_slice(d, d, (dense * vx).as_slice());
            let got = op.normal_apply(&x).unwrap();
            assert!((got - expected).norm() < 1e-12 * x.norm());
            let composed = op
                .adjoint_complex(&op.forward_complex(&x).unwrap())
                .unwrap();
            assert!((op.normal_apply(&x).unwrap() - composed).norm() < 1e-12 * x.norm());
        }
        let op = SamplingOperator::draw(2, 5, 0).unwrap();
        assert_eq!(op.normal_apply(&CMatrix::zeros(4, 4)).unwrap().norm(), 0.0);
    }

    #[test]
    fn forward_is_linear() {
        let op = SamplingOperator::draw(3, 40, 5).unwrap();
        let x = random_hermitian(8, 1);
        let y = random_hermitian(8, 2);
        let (a, b) = (0.7, -2.5);
        let lhs = op.forward(&(x.scale(a) + y.scale(b))).unwrap();
        let fx = op.forward(&x).unwrap();
        let fy = op.forward(&y).unwrap();
        for i in 0..lhs.len() {
            assert!((lhs[i] - (a * fx[i] + b * fy[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_normal_operator_is_identity() {
        let x = random_hermitian(4, 42);
        let draws = 10_000;
        let mut acc = CMatrix::zeros(4, 4);
        for seed in 0..draws {
            let op = SamplingOperator::draw(2, 8, seed).unwrap();
            acc += op.normal_apply(&x).unwrap();
        }
        let mean = acc.unscale(draws as f64);
        assert!((mean - &x).norm() < 0.05 * x.norm());
    }

    #[test]
    fn nnq_preimage_contract() {
        let op = SamplingOperator::draw_distinct(3, 32, 4).unwrap();
        let zero = op.nnq_preimage(&[0.0; 32]).unwrap();
        assert_eq!(zero.matrix.norm(), 0.0);
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let raw: Vec<f64> = (0..32).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            let y: Vec<f64> = raw.iter().map(|v| v * op.nnq_radius() / norm).collect();
            let pre = op.nnq_preimage(&y).unwrap();
            assert!(pre.within_radius);
            assert!(nuclear_norm(&pre.matrix) <= 1.0 + 1e-10);
            let back = op.forward(&pre.matrix).unwrap();
            let err = back
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-10);
            let big: Vec<f64> = y.iter().map(|v| 3.0 * v).collect();
            assert!(!op.nnq_preimage(&big).unwrap().within_radius);
        }
    }

    #[test]
    fn nnq_rejects_duplicates() {
        let op = SamplingOperator::from_indices(2, &[1, 5, 1]).unwrap();
        assert_eq!(
            op.nnq_preimage(&[0.0; 3]).unwrap_err(),
            Error::DuplicateLabels(2)
        );
    }

    #[test]
    fn hermitian_state_gives_real_measurements() {
        let rho = random_rank_r_state(8, 2, 1).unwrap();
        let op = SamplingOperator::draw(3, 50, 1).unwrap();
        let complex = op.forward_complex(&rho).unwrap();
        assert!(complex.iter().all(|v| v.im.abs() < 1e-12));
    }
}
