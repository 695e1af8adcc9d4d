//! Empirical RIP constants, recovery error bounds and commutation checks.
//!
//! `ε_r(A) = sup |(X, (A*A − I) X)|` over `‖X‖_F ≤ 1, ‖X‖_* ≤ √r ‖X‖_F`.
//! Both estimators below search only Hermitian matrices of rank at most `r`
//! with unit Frobenius norm, so they return lower bounds on `ε_r`.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::matrix::{
    eigh, frobenius_norm, nuclear_norm, operator_norm, real_inner, sample_u2, spectral_split,
    CMatrix, HermitianMatrix,
};
use crate::pauli::{basis_size, check_qubits, PauliLabel};
use crate::sampling::SamplingOperator;
use crate::{rng_from_seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RipMethod {
    Sampled { samples: usize },
    LocalAscent { restarts: usize },
}

impl RipMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            RipMethod::Sampled { .. } => "sampled",
            RipMethod::LocalAscent { .. } => "ascent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipEstimate {
    /// Lower bound on `ε_r(A)`.
    pub epsilon_hat: f64,
    pub r: usize,
    pub method: RipMethod,
    pub samples_used: usize,
}

impl RipEstimate {
    pub fn implied_delta(&self) -> Option<f64> {
        implied_delta(self.epsilon_hat)
    }
}

/// Solve `ε = 2δ − δ²` for `δ ∈ [0, 1]`; `None` when `ε > 1`.
pub fn implied_delta(epsilon: f64) -> Option<f64> {
    if !(0.0..=1.0).contains(&epsilon) {
        return None;
    }
    Some(1.0 - (1.0 - epsilon).sqrt())
}

/// `‖A(X)‖₂² − ‖X‖_F² = (X, (A*A − I) X)`.
pub fn isometry_defect(op: &SamplingOperator, x: &CMatrix) -> f64 {
    let ax = op.forward_real(x);
    ax.iter().map(|v| v * v).sum::<f64>() - x.norm_squared()
}

fn check_rip_rank(op: &SamplingOperator, r: usize) -> Result<()> {
    if r == 0 || r > op.dim() {
        return Err(Error::RankOutOfRange {
            rank: r,
            dim: op.dim(),
        });
    }
    Ok(())
}

/// Largest `|‖A(X)‖² − 1|` over `samples` random unit-Frobenius Hermitian
/// `X` of rank `r`.
pub fn rip_epsilon_sampled(
    op: &SamplingOperator,
    r: usize,
    samples: usize,
    seed: u64,
) -> Result<RipEstimate> {
    check_rip_rank(op, r)?;
    if samples == 0 {
        return Err(Error::param("samples", "need at least one sample"));
    }
    let mut rng = rng_from_seed(seed);
    let mut best = 0.0f64;
    for _ in 0..samples {
        let x = sample_u2(op.dim(), r, &mut rng);
        best = best.max(isometry_defect(op, &x).abs());
    }
    Ok(RipEstimate {
        epsilon_hat: best,
        r,
        method: RipMethod::Sampled { samples },
        samples_used: samples,
    })
}

const ASCENT_MAX_STEPS: usize = 300;
const ASCENT_TOL: f64 = 1e-12;

/// Projected gradient ascent of `|(X, (A*A − I) X)|` over unit-Frobenius
/// Hermitian `X` of rank at most `r`, best over `restarts` random starts.
///
/// Each start is drawn exactly as in [`rip_epsilon_sampled`] with the same
/// seed, and both signs of the quadratic form are ascended from it. The
/// retraction keeps the `r` eigenpairs of largest magnitude and
/// renormalizes.
pub fn rip_epsilon_ascent(
    op: &SamplingOperator,
    r: usize,
    restarts: usize,
    seed: u64,
) -> Result<RipEstimate> {
    check_rip_rank(op, r)?;
    if restarts == 0 {
        return Err(Error::param("restarts", "need at least one restart"));
    }
    let mut rng = rng_from_seed(seed);
    let mut best = 0.0f64;
    for _ in 0..restarts {
        let start = sample_u2(op.dim(), r, &mut rng).into_inner();
        for sign in [1.0, -1.0] {
            best = best.max(ascend(op, r, &start, sign).abs());
        }
    }
    Ok(RipEstimate {
        epsilon_hat: best,
        r,
        method: RipMethod::LocalAscent { restarts },
        samples_used: restarts,
    })
}

fn retract(y: &CMatrix, r: usize) -> Option<CMatrix> {
    let eig = eigh(y);
    let order = eig.order_by_magnitude();
    let mut values = alloc::vec![0.0; y.nrows()];
    for &k in order.iter().take(r) {
        values[k] = eig.values[k];
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return None;
    }
    for v in &mut values {
        *v /= norm;
    }
    Some(HermitianMatrix::from_eigen(&values, &eig.vectors).into_inner())
}

/// Maximizes `sign · f(X)`; returns `f` at the best point found.
fn ascend(op: &SamplingOperator, r: usize, start: &CMatrix, sign: f64) -> f64 {
    let mut x = start.clone();
    let mut value = sign * isometry_defect(op, &x);
    let mut eta = 0.5;
    for _ in 0..ASCENT_MAX_STEPS {
        let grad = (op.normal_unchecked(&x) - &x).scale(2.0 * sign);
        let mut improved = false;
        for _ in 0..30 {
            if let Some(candidate) = retract(&(&x + grad.scale(eta)), r) {
                let cand_value = sign * isometry_defect(op, &candidate);
                if cand_value > value {
                    let gain = cand_value - value;
                    x = candidate;
                    value = cand_value;
                    eta *= 1.5;
                    improved = gain > ASCENT_TOL * value.abs().max(1.0);
                    break;
                }
            }
            eta *= 0.5;
        }
        if !improved {
            break;
        }
    }
    sign * value
}

/// User-chosen constants for the recovery bounds (all default to 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub c0_prime: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants {
            c0_prime: 1.0,
            c0: 1.0,
            c1: 1.0,
            c2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub nuclear_error: f64,
    pub frobenius_error: f64,
    pub operator_error: f64,
    /// `‖M_c‖_*` and `‖M_c‖_F` of the rank-`r` tail.
    pub tail_nuclear: f64,
    pub tail_frobenius: f64,
    /// `C′₀ ‖M_c‖_*` (nuclear-norm scale).
    pub bound_rhs_noiseless: f64,
    /// `C₀ √(rd) σ + C₁ ‖M_c‖_* / √r` (Frobenius scale).
    pub bound_rhs_gaussian: f64,
    /// `√(C₀ Σ_{i≤r} min(σ_i², dσ²) + C₂ ln⁶(d) Σ_{i>r} σ_i²)` (Frobenius scale).
    pub bound_rhs_tail: f64,
    pub constants_used: BoundConstants,
    /// The tail vanishes, so the noiseless bound demands exact recovery.
    pub exact_recovery_mode: bool,
}

impl ErrorReport {
    pub fn noiseless_ratio(&self) -> f64 {
        ratio(self.nuclear_error, self.bound_rhs_noiseless)
    }

    pub fn gaussian_ratio(&self) -> f64 {
        ratio(self.frobenius_error, self.bound_rhs_gaussian)
    }

    pub fn tail_ratio(&self) -> f64 {
        ratio(self.frobenius_error, self.bound_rhs_tail)
    }
}

fn ratio(error: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        error / bound
    } else if error == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Error norms of `estimate − truth` and the three bound right-hand sides.
pub fn error_report(
    truth: &HermitianMatrix,
    estimate: &HermitianMatrix,
    r: usize,
    sigma: f64,
    constants: BoundConstants,
) -> Result<ErrorReport> {
    let d = truth.dim();
    if r == 0 || r > d {
        return Err(Error::RankOutOfRange { rank: r, dim: d });
    }
    if estimate.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: estimate.dim(),
        });
    }
    if !(sigma >= 0.0) {
        return Err(Error::param("sigma", "must be non-negative"));
    }
    let diff = truth.as_matrix() - estimate.as_matrix();
    let split = spectral_split(truth, r)?;
    let tail_nuclear: f64 = split.singular_values[r..].iter().sum();
    let tail_sq: f64 = split.singular_values[r..].iter().map(|s| s * s).sum();
    let head_term: f64 = split.singular_values[..r]
        .iter()
        .map(|s| (s * s).min(d as f64 * sigma * sigma))
        .sum();
    let (rf, df) = (r as f64, d as f64);
    let total_nuclear: f64 = split.singular_values.iter().sum();
    Ok(ErrorReport {
        nuclear_error: nuclear_norm(&diff),
        frobenius_error: frobenius_norm(&diff),
        operator_error: operator_norm(&diff),
        tail_nuclear,
        tail_frobenius: tail_sq.sqrt(),
        bound_rhs_noiseless: constants.c0_prime * tail_nuclear,
        bound_rhs_gaussian: constants.c0 * (rf * df).sqrt() * sigma
            + constants.c1 * tail_nuclear / rf.sqrt(),
        bound_rhs_tail: (constants.c0 * head_term + constants.c2 * df.ln().powi(6) * tail_sq)
            .sqrt(),
        constants_used: constants,
        exact_recovery_mode: tail_nuclear <= 1e-10 * total_nuclear.max(f64::MIN_POSITIVE),
    })
}

/// Whether every pair of labels commutes.
pub fn all_commute(labels: &[PauliLabel]) -> Result<bool> {
    let mut result = true;
    for (i, a) in labels.iter().enumerate() {
        for b in &labels[i + 1..] {
            // Keep scanning after a failure so a qubit mismatch is still reported.
            if !a.commutes(b)? {
                result = false;
            }
        }
    }
    Ok(result)
}

/// Monte-Carlo fraction of iid uniform `m`-tuples of labels that pairwise
/// commute.
pub fn commuting_fraction(n: u32, m: usize, trials: usize, seed: u64) -> Result<f64> {
    check_qubits(n)?;
    if trials == 0 || m == 0 {
        return Err(Error::param("trials", "need m ≥ 1 and trials ≥ 1"));
    }
    let total = basis_size(n);
    let mut rng = rng_from_seed(seed);
    let mut hits = 0usize;
    let mut tuple = Vec::with_capacity(m);
    for _ in 0..trials {
        tuple.clear();
        for _ in 0..m {
            tuple.push(PauliLabel::from_index(n, rng.random_range(0..total))?);
        }
        if all_commute(&tuple)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// Largest number of tuples [`commuting_fraction_exhaustive`] will visit.
pub const MAX_EXHAUSTIVE_TUPLES: u64 = 1 << 24;

/// Exact fraction of ordered `m`-tuples (with repetition) of `n`-qubit
/// labels that pairwise commute, by enumeration.
pub fn commuting_fraction_exhaustive(n: u32, m: usize) -> Result<f64> {
    check_qubits(n)?;
    if m == 0 {
        return Err(Error::param("m", "need m ≥ 1"));
    }
    let base = basis_size(n);
    let count = (0..m).try_fold(1u64, |acc, _| acc.checked_mul(base));
    let count = match count {
        Some(c) if c <= MAX_EXHAUSTIVE_TUPLES => c,
        _ => return Err(Error::param("m", "too many tuples to enumerate")),
    };
    let labels = crate::pauli::all_labels(n)?;
    let mut hits = 0u64;
    let mut tuple = Vec::with_capacity(m);
    for code in 0..count {
        tuple.clear();
        let mut rest = code;
        for _ in 0..m {
            tuple.push(labels[(rest % base) as usize]);
            rest /= base;
        }
        if all_commute(&tuple)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / count as f64)
}

/// `(X, (A*A − I) X)` for the real inner product; exposed for diagnostics.
pub fn quadratic_form(op: &SamplingOperator, x: &CMatrix) -> f64 {
    real_inner(x, &(op.normal_unchecked(x) - x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{random_rank_r_state, DensityMatrix};
    use crate::{rng_from_seed, Complex64};
    use alloc::vec;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn sampled_full_basis_is_zero() {
        let op = SamplingOperator::full_basis(2).unwrap();
        for r in 1..=4 {
            let est = rip_epsilon_sampled(&op, r, 50, r as u64).unwrap();
            assert!(est.epsilon_hat < 1e-10);
            assert_eq!(est.method.tag(), "sampled");
        }
    }

    #[test]
    fn single_measurement_is_far_from_isometric() {
        let op = SamplingOperator::draw(2, 1, 3).unwrap();
        let est = rip_epsilon_sampled(&op, 1, 1000, 4).unwrap();
        assert!(est.epsilon_hat >= 0.5, "{}", est.epsilon_hat);
    }

    #[test]
    fn sampled_is_monotone_in_samples_and_deterministic() {
        let op = SamplingOperator::draw(3, 20, 1).unwrap();
        let mut last = 0.0;
        for n in [1, 10, 100, 400] {
            let est = rip_epsilon_sampled(&op, 2, n, 9).unwrap();
            assert!(est.epsilon_hat >= last);
            last = est.epsilon_hat;
        }
        assert_eq!(
            rip_epsilon_sampled(&op, 2, 50, 9).unwrap(),
            rip_epsilon_sampled(&op, 2, 50, 9).unwrap()
        );
        assert!(rip_epsilon_sampled(&op, 0, 5, 0).is_err());
        assert!(rip_epsilon_sampled(&op, 1, 0, 0).is_err());
    }

    #[test]
    fn ascent_full_basis_is_zero() {
        let op = SamplingOperator::full_basis(2).unwrap();
        for r in 1..=4 {
            let est = rip_epsilon_ascent(&op, r, 3, r as u64).unwrap();
            assert!(est.epsilon_hat <= 1e-8);
        }
    }

    #[test]
    fn ascent_dominates_sampling() {
        let mut holds = 0;
        for run in 0..50u64 {
            let op = SamplingOperator::draw(3, 24, run).unwrap();
            let sampled = rip_epsilon_sampled(&op, 1 + (run as usize % 2), 20, run + 100).unwrap();
            let ascent = rip_epsilon_ascent(&op, 1 + (run as usize % 2), 5, run + 100).unwrap();
            if ascent.epsilon_hat >= sampled.epsilon_hat {
                holds += 1;
            }
        }
        assert!(holds >= 45, "{holds}/50");
    }

    // |(d/m) Σ_j <v|P_j|v>² − 1| maximized over unit v ∈ C^4 by a random
    // multistart hill climb on dense Pauli matrices.
    fn dense_rank_one_sup(op: &SamplingOperator, seed: u64) -> f64 {
        let d = op.dim();
        let dense: Vec<CMatrix> = op.labels().iter().map(|l| l.dense_matrix()).collect();
        let scale = d as f64 / op.num_measurements() as f64;
        let value = |v: &CMatrix| {
            let v = v.unscale(v.norm());
            let s: f64 = dense
                .iter()
                .map(|p| (v.adjoint() * p * &v)[(0, 0)].re.powi(2))
                .sum();
            (scale * s - 1.0).abs()
        };
        let mut rng = rng_from_seed(seed);
        let mut gauss = |rows| {
            CMatrix::from_fn(rows, 1, |_, _| {
                Complex64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                )
            })
        };
        let mut best = 0.0f64;
        for _ in 0..200 {
            let mut v = gauss(d);
            let mut f = value(&v);
            let mut radius = 0.5;
            while radius > 1e-6 {
                let mut improved = false;
                for _ in 0..20 {
                    let cand = &v + gauss(d).scale(radius);
                    let fc = value(&cand);
                    if fc > f {
                        v = cand.unscale(cand.norm());
                        f = fc;
                        improved = true;
                    }
                }
                if !improved {
                    radius *= 0.5;
                }
            }
            best = best.max(f);
        }
        best
    }

    #[test]
    fn ascent_matches_dense_rank_one_oracle() {
        for seed in 0..3u64 {
            let op = SamplingOperator::draw(2, 8, seed).unwrap();
            let oracle = dense_rank_one_sup(&op, seed + 10);
            let ascent = rip_epsilon_ascent(&op, 1, 20, seed + 20)
                .unwrap()
                .epsilon_hat;
            assert!(
                (ascent - oracle).abs() <= 0.1 * oracle,
                "ascent {ascent} oracle {oracle}"
            );
        }
    }

    #[test]
    fn delta_from_epsilon() {
        assert_eq!(implied_delta(0.0), Some(0.0));
        let delta = implied_delta(0.75).unwrap();
        assert!((2.0 * delta - delta * delta - 0.75).abs() < 1e-15);
        assert!((0.0..1.0).contains(&delta));
        assert_eq!(implied_delta(1.5), None);
    }

    #[test]
    fn perfect_estimate_report() {
        let rho = random_rank_r_state(8, 1, 3).unwrap();
        let rep = error_report(&rho, &rho, 1, 0.0, BoundConstants::default()).unwrap();
        assert_eq!((rep.nuclear_error, rep.frobenius_error), (0.0, 0.0));
        assert!(rep.exact_recovery_mode);
        assert!(rep.bound_rhs_noiseless < 1e-12);
        assert!(error_report(&rho, &rho, 0, 0.0, BoundConstants::default()).is_err());
        assert!(error_report(&rho, &rho, 9, 0.0, BoundConstants::default()).is_err());
    }

    #[test]
    fn maximally_mixed_tail() {
        let d = 16;
        let mixed = DensityMatrix::maximally_mixed(d);
        let zero = HermitianMatrix::zeros(d);
        let constants = BoundConstants {
            c0_prime: 2.0,
            c0: 3.0,
            c1: 5.0,
            c2: 7.0,
        };
        let (r, sigma) = (4, 0.01);
        let rep = error_report(&mixed, &zero, r, sigma, constants).unwrap();
        let tail = 1.0 - r as f64 / d as f64;
        assert!((rep.tail_nuclear - tail).abs() < 1e-12);
        assert!((rep.bound_rhs_noiseless - 2.0 * tail).abs() < 1e-12);
        let gaussian = 3.0 * ((r * d) as f64).sqrt() * sigma + 5.0 * tail / 2.0;
        assert!((rep.bound_rhs_gaussian - gaussian).abs() < 1e-12);
        // σ_i² = 1/256 exceeds dσ² = 0.0016, so the head is clipped.
        let head = 4.0 * 0.0016;
        let tail_sq = 12.0 / 256.0;
        let tail_bound = (3.0 * head + 7.0 * 16f64.ln().powi(6) * tail_sq).sqrt();
        assert!((rep.bound_rhs_tail - tail_bound).abs() < 1e-10);
        assert!(!rep.exact_recovery_mode);
        assert!((rep.nuclear_error - 1.0).abs() < 1e-12);
    }

    fn labels(n: u32, idx: &[u64]) -> Vec<PauliLabel> {
        idx.iter()
            .map(|&i| PauliLabel::from_index(n, i).unwrap())
            .collect()
    }

    #[test]
    fn all_commute_examples() {
        assert!(all_commute(&labels(1, &[0, 3])).unwrap());
        assert!(!all_commute(&labels(1, &[1, 3])).unwrap());
        assert!(all_commute(&labels(2, &[6])).unwrap());
        let mixed = vec![
            PauliLabel::from_index(1, 1).unwrap(),
            PauliLabel::from_index(2, 1).unwrap(),
        ];
        assert!(all_commute(&mixed).is_err());
    }

    // Ordered pairs on one qubit, counted with dense commutators.
    fn dense_pair_fraction() -> f64 {
        let all = crate::pauli::all_labels(1).unwrap();
        let mut hits = 0;
        for a in &all {
            for b in &all {
                let (pa, pb) = (a.dense_matrix(), b.dense_matrix());
                if (&pa * &pb - &pb * &pa).norm() == 0.0 {
                    hits += 1;
                }
            }
        }
        hits as f64 / 16.0
    }

    #[test]
    fn commuting_fraction_single_qubit_pairs() {
        let exact = dense_pair_fraction();
        assert_eq!(exact, 10.0 / 16.0);
        assert_eq!(commuting_fraction_exhaustive(1, 2).unwrap(), exact);
        let trials = 20_000;
        let mc = commuting_fraction(1, 2, trials, 5).unwrap();
        let se = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!((mc - exact).abs() < 3.0 * se);
    }

    #[test]
    fn commuting_fraction_edge_cases() {
        assert_eq!(commuting_fraction(3, 1, 100, 1).unwrap(), 1.0);
        assert_eq!(commuting_fraction_exhaustive(2, 1).unwrap(), 1.0);
        assert!(commuting_fraction(3, 1, 0, 1).is_err());
        assert!(commuting_fraction_exhaustive(4, 4).is_err());
    }

    #[test]
    fn random_large_sets_rarely_commute() {
        assert!(commuting_fraction(4, 32, 10_000, 2).unwrap() < 1e-2);
    }

    #[test]
    fn quadratic_form_matches_defect() {
        let op = SamplingOperator::draw(2, 6, 1).unwrap();
        let x = crate::matrix::random_u2_element(4, 2, 3).unwrap();
        assert!((quadratic_form(&op, &x) - isometry_defect(&op, &x)).abs() < 1e-12);
    }
}
