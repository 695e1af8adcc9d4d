//! Hermitian and density matrices, spectral splits and Schatten norms.

use alloc::vec::Vec;
use core::ops::Deref;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::{rng_from_seed, Error, Result, Rng};

pub type CMatrix = DMatrix<Complex64>;

/// Relative anti-Hermitian defect tolerated by [`HermitianMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalue and trace slack tolerated by [`DensityMatrix::new`].
pub const DENSITY_TOL: f64 = 1e-10;

/// A square complex matrix with `‖M − M†‖_F ≤ 1e-10 ‖M‖_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let scale = m.norm();
        let defect = (&m - m.adjoint()).norm();
        if defect > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(defect / scale));
        }
        Ok(HermitianMatrix(m))
    }

    /// `(M + M†)/2`; always succeeds for square input.
    pub fn hermitian_part(m: &CMatrix) -> Self {
        HermitianMatrix((m + m.adjoint()).scale(0.5))
    }

    pub fn zeros(d: usize) -> Self {
        HermitianMatrix(CMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        HermitianMatrix(CMatrix::identity(d, d))
    }

    /// `Σ_k values[k] v_k v_k†` for the columns `v_k` of `vectors`.
    pub fn from_eigen(values: &[f64], vectors: &CMatrix) -> Self {
        let d = vectors.nrows();
        let mut out = CMatrix::zeros(d, d);
        for (k, &lambda) in values.iter().enumerate() {
            if lambda == 0.0 {
                continue;
            }
            let v = vectors.column(k);
            out.gerc(
                Complex64::new(lambda, 0.0),
                &v,
                &v,
                Complex64::new(1.0, 0.0),
            );
        }
        HermitianMatrix(out)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn scale(&self, factor: f64) -> Self {
        HermitianMatrix(self.0.scale(factor))
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Eigenvalues (unsorted, as returned by the solver) and eigenvectors.
    pub fn eigen(&self) -> Eigen {
        eigh(&self.0)
    }
}

impl Deref for HermitianMatrix {
    type Target = CMatrix;

    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

/// Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

impl DensityMatrix {
    pub fn new(m: HermitianMatrix) -> Result<Self> {
        let trace = m.trace();
        if (trace - 1.0).abs() > DENSITY_TOL {
            return Err(Error::NonPhysical(alloc::format!("trace {trace} != 1")));
        }
        let min = m
            .eigen()
            .values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min < -DENSITY_TOL {
            return Err(Error::NonPhysical(alloc::format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(DensityMatrix(m))
    }

    /// `I/d`.
    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix(HermitianMatrix::identity(d).scale(1.0 / d as f64))
    }

    /// Convex combination `(1 − w) self + w other`.
    pub fn mix(&self, other: &DensityMatrix, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::param("weight", "must lie in [0, 1]"));
        }
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let m = self.0 .0.scale(1.0 - weight) + other.0 .0.scale(weight);
        Ok(DensityMatrix(HermitianMatrix(m)))
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.0
    }
}

impl Deref for DensityMatrix {
    type Target = HermitianMatrix;

    fn deref(&self) -> &HermitianMatrix {
        &self.0
    }
}

#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    /// Indices ordered by decreasing `|λ|`; the sort is stable so ties keep
    /// the solver's order.
    pub fn order_by_magnitude(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| {
            self.values[b]
                .abs()
                .partial_cmp(&self.values[a].abs())
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        order
    }
}

/// Eigendecomposition of a Hermitian matrix (only the Hermitian part is read).
pub fn eigh(m: &CMatrix) -> Eigen {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    Eigen {
        values: eig.eigenvalues.iter().cloned().collect(),
        vectors: eig.eigenvectors,
    }
}

/// Singular values in decreasing order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().cloned().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    s
}

/// Schatten-1 norm.
pub fn nuclear_norm(m: &CMatrix) -> f64 {
    singular_values(m).iter().sum()
}

/// Schatten-2 norm.
pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.norm()
}

/// Schatten-∞ norm.
pub fn operator_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// `M = head + tail` with `head` carrying the `r` largest singular values.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub head: HermitianMatrix,
    pub tail: HermitianMatrix,
    pub rank: usize,
    /// All singular values of the original matrix, decreasing.
    pub singular_values: Vec<f64>,
}

/// Split a Hermitian matrix into its best rank-`r` part and the remainder.
///
/// For Hermitian input the singular values are `|λ_i|`, so the split is
/// done on the eigendecomposition. Degenerate singular values make the
/// split non-unique; the first `r` in decomposition order are kept.
pub fn spectral_split(m: &HermitianMatrix, r: usize) -> Result<SpectralSplit> {
    let d = m.dim();
    if r > d {
        return Err(Error::RankOutOfRange { rank: r, dim: d });
    }
    let eig = m.eigen();
    let order = eig.order_by_magnitude();
    let mut head_values = alloc::vec![0.0; d];
    let mut tail_values = alloc::vec![0.0; d];
    for (pos, &k) in order.iter().enumerate() {
        if pos < r {
            head_values[k] = eig.values[k];
        } else {
            tail_values[k] = eig.values[k];
        }
    }
    Ok(SpectralSplit {
        head: HermitianMatrix::from_eigen(&head_values, &eig.vectors),
        tail: HermitianMatrix::from_eigen(&tail_values, &eig.vectors),
        rank: r,
        singular_values: order.iter().map(|&k| eig.values[k].abs()).collect(),
    })
}

fn complex_gaussian(rows: usize, cols: usize, rng: &mut Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

fn check_rank(d: usize, r: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::param("d", "dimension must be positive"));
    }
    if r == 0 || r > d {
        return Err(Error::RankOutOfRange { rank: r, dim: d });
    }
    Ok(())
}

/// Random rank-`r` density matrix `G G† / Tr(G G†)` with `G` a `d × r`
/// complex Gaussian matrix.
pub fn random_rank_r_state(d: usize, r: usize, seed: u64) -> Result<DensityMatrix> {
    check_rank(d, r)?;
    let mut rng = rng_from_seed(seed);
    let g = complex_gaussian(d, r, &mut rng);
    let gram = &g * g.adjoint();
    let trace = gram.trace().re;
    let rho = HermitianMatrix::hermitian_part(&gram.unscale(trace));
    Ok(DensityMatrix(rho))
}

/// Random Hermitian `X` of rank at most `r` with `‖X‖_F = 1`.
///
/// Eigenvectors come from the QR factor of a complex Gaussian matrix,
/// eigenvalues are iid standard normal before normalization.
pub fn random_u2_element(d: usize, r: usize, seed: u64) -> Result<HermitianMatrix> {
    check_rank(d, r)?;
    let mut rng = rng_from_seed(seed);
    Ok(sample_u2(d, r, &mut rng))
}

pub(crate) fn sample_u2(d: usize, r: usize, rng: &mut Rng) -> HermitianMatrix {
    let g = complex_gaussian(d, r, rng);
    let q = g.qr().q();
    let values: Vec<f64> = (0..r).map(|_| StandardNormal.sample(rng)).collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let values: Vec<f64> = values.iter().map(|v| v / norm).collect();
    let x = HermitianMatrix::from_eigen(&values, &q);
    let f = x.0.norm();
    HermitianMatrix::hermitian_part(&x.0.unscale(f))
}

/// Real-part Frobenius inner product `Re Tr(A† B)`.
pub fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Complex Frobenius inner product `Tr(A† B)`.
pub fn inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn diag(values: &[f64]) -> CMatrix {
        let v: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        CMatrix::from_diagonal(&DVector::from_vec(v))
    }

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn pure_state_spectrum() {
        for seed in 0..5 {
            let rho = random_rank_r_state(2, 1, seed).unwrap();
            let ev = sorted(rho.eigen().values);
            assert!(ev[0].abs() < 1e-10 && (ev[1] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn full_rank_state_is_positive_definite() {
        let rho = random_rank_r_state(8, 8, 3).unwrap();
        let ev = sorted(rho.eigen().values);
        assert!(ev[0] > 0.0);
    }

    #[test]
    fn state_generation_is_deterministic() {
        let a = random_rank_r_state(6, 2, 11).unwrap();
        let b = random_rank_r_state(6, 2, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_rank_r_state(6, 2, 12).unwrap());
    }

    #[test]
    fn states_pass_density_invariants() {
        for d in [1, 2, 3, 8, 16, 64] {
            for r in [1, d / 2, d] {
                if r == 0 {
                    continue;
                }
                let rho = random_rank_r_state(d, r, (d * 100 + r) as u64).unwrap();
                DensityMatrix::new(rho.as_hermitian().clone()).unwrap();
            }
        }
    }

    #[test]
    fn rank_errors() {
        assert!(matches!(
            random_rank_r_state(2, 3, 0),
            Err(Error::RankOutOfRange { .. })
        ));
        assert!(random_u2_element(4, 0, 0).is_err());
    }

    #[test]
    fn split_of_rank_one_has_zero_tail() {
        let rho = random_rank_r_state(4, 1, 9).unwrap();
        let split = spectral_split(&rho, 1).unwrap();
        assert!(split.tail.norm() < 1e-10);
        assert!((&split.head.0 - &rho.0 .0).norm() < 1e-10);
    }

    #[test]
    fn split_of_maximally_mixed() {
        let d = 8;
        let mixed = DensityMatrix::maximally_mixed(d);
        for r in 0..=d {
            let split = spectral_split(&mixed, r).unwrap();
            let tail = nuclear_norm(&split.tail);
            assert!((tail - (1.0 - r as f64 / d as f64)).abs() < 1e-10);
        }
    }

    #[test]
    fn split_with_zero_rank() {
        let rho = random_rank_r_state(4, 3, 1).unwrap();
        let split = spectral_split(&rho, 0).unwrap();
        assert!(split.head.norm() == 0.0);
        assert!((&split.tail.0 - &rho.0 .0).norm() < 1e-12);
        assert!(spectral_split(&rho, 5).is_err());
    }

    #[test]
    fn split_invariants_on_indefinite_matrix() {
        let x = random_u2_element(10, 6, 4).unwrap();
        let split = spectral_split(&x, 3).unwrap();
        let sum = &split.head.0 + &split.tail.0;
        assert!((sum - &x.0).norm() < 1e-10);
        assert!(inner(&split.head, &split.tail).norm() < 1e-8);
        let pyth = split.head.norm().powi(2) + split.tail.norm().powi(2);
        assert!((pyth - x.norm().powi(2)).abs() < 1e-8);
        let head_sv = singular_values(&split.head);
        assert!(head_sv[3] < 1e-10);
    }

    #[test]
    fn norms_of_diagonal() {
        let m = diag(&[3.0, -4.0]);
        assert!((nuclear_norm(&m) - 7.0).abs() < 1e-12);
        assert!((frobenius_norm(&m) - 5.0).abs() < 1e-12);
        assert!((operator_norm(&m) - 4.0).abs() < 1e-12);
        let z = CMatrix::zeros(3, 3);
        assert_eq!(
            (nuclear_norm(&z), frobenius_norm(&z), operator_norm(&z)),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn rank_one_norms_coincide() {
        let mut rng = rng_from_seed(5);
        let u = complex_gaussian(5, 1, &mut rng);
        let v = complex_gaussian(5, 1, &mut rng);
        let m = &u * v.adjoint();
        let (a, b, c) = (nuclear_norm(&m), frobenius_norm(&m), operator_norm(&m));
        assert!((a - b).abs() < 1e-10 * a && (b - c).abs() < 1e-10 * b);
    }

    #[test]
    fn norm_ordering_on_random_matrices() {
        let mut rng = rng_from_seed(77);
        for k in 0..1000 {
            let d = 1 + k % 7;
            let m = complex_gaussian(d, d, &mut rng);
            let (nuc, fro, op) = (nuclear_norm(&m), frobenius_norm(&m), operator_norm(&m));
            let slack = 1e-10 * nuc;
            assert!(op <= fro + slack && fro <= nuc + slack);
            assert!(nuc <= (d as f64).sqrt() * fro + slack);
        }
    }

    #[test]
    fn u2_elements() {
        for seed in 0..20 {
            let r = 1 + (seed as usize) % 4;
            let x = random_u2_element(6, r, seed).unwrap();
            assert!((x.norm() - 1.0).abs() < 1e-12);
            assert!(nuclear_norm(&x) <= (r as f64).sqrt() + 1e-10);
            assert!(HermitianMatrix::new(x.as_matrix().clone()).is_ok());
        }
        for seed in 0..20 {
            let x = random_u2_element(2, 1, seed).unwrap();
            assert!(singular_values(&x)[1] <= 1e-10);
        }
    }

    #[test]
    fn hermitian_check() {
        let mut m = diag(&[1.0, 2.0]);
        m[(0, 1)] = Complex64::new(0.0, 1.0);
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(Error::NotHermitian(_))
        ));
        assert!(DensityMatrix::new(HermitianMatrix::new(diag(&[1.5, -0.5])).unwrap()).is_err());
        assert!(DensityMatrix::new(HermitianMatrix::new(diag(&[0.5, 0.25])).unwrap()).is_err());
    }
}
