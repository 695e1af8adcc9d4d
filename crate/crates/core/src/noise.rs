//! Measurement data `y = A(M) + z`.
//!
//! Three models: exact data, iid real Gaussian noise on the forward scale,
//! and finite-shot noise, where each Pauli expectation is estimated from
//! `t` single-shot `±1` outcomes and then mapped through the same
//! `√(d/m)` normalization as [`SamplingOperator::forward`].

use alloc::vec::Vec;

use rand_distr::{Binomial, Distribution, Normal};

use crate::matrix::{DensityMatrix, HermitianMatrix};
use crate::sampling::SamplingOperator;
use crate::{rng_from_seed, Error, Result, Rng};

/// Slack allowed on `|Tr(P M)| ≤ 1` before a state is rejected as unphysical.
pub const EXPECTATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Exact,
    Gaussian { sigma: f64 },
    Shots { shots: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub y: Vec<f64>,
    pub model: NoiseModel,
    pub seed: Option<u64>,
}

pub fn measure_exact(op: &SamplingOperator, m: &HermitianMatrix) -> Result<MeasurementRecord> {
    Ok(MeasurementRecord {
        y: op.forward(m)?,
        model: NoiseModel::Exact,
        seed: None,
    })
}

/// `y = A(M) + z` with `z` iid `N(0, σ²)`.
pub fn measure_gaussian(
    op: &SamplingOperator,
    m: &HermitianMatrix,
    sigma: f64,
    seed: u64,
) -> Result<MeasurementRecord> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param("sigma", "must be finite and non-negative"));
    }
    let mut y = op.forward(m)?;
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|_| Error::param("sigma", "invalid"))?;
        let mut rng = rng_from_seed(seed);
        for v in &mut y {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(MeasurementRecord {
        y,
        model: NoiseModel::Gaussian { sigma },
        seed: Some(seed),
    })
}

/// Finite-shot data: `t` outcomes per setting, `y_i = √(d/m) · p̂_i`.
pub fn measure_shots(
    op: &SamplingOperator,
    state: &DensityMatrix,
    shots: u64,
    seed: u64,
) -> Result<MeasurementRecord> {
    if shots == 0 {
        return Err(Error::param("shots", "need at least one shot"));
    }
    let expectations = physical_expectations(op, state)?;
    let scale = op.entry_scale();
    let mut rng = rng_from_seed(seed);
    let y = expectations
        .iter()
        .map(|&p| sample_expectation(p, shots, &mut rng).map(|p_hat| p_hat * scale))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementRecord {
        y,
        model: NoiseModel::Shots { shots },
        seed: Some(seed),
    })
}

/// Empirical mean of `shots` iid `±1` outcomes with mean `p`.
///
/// The number of `+1` outcomes is `Binomial(t, (1 + p)/2)`.
pub fn sample_expectation(p: f64, shots: u64, rng: &mut Rng) -> Result<f64> {
    if shots == 0 {
        return Err(Error::param("shots", "need at least one shot"));
    }
    let p = clamp_expectation(p)?;
    let prob_plus = (0.5 * (1.0 + p)).clamp(0.0, 1.0);
    let plus = Binomial::new(shots, prob_plus)
        .map_err(|_| Error::param("p", "invalid outcome probability"))?
        .sample(rng);
    Ok(2.0 * plus as f64 / shots as f64 - 1.0)
}

/// `Tr(P_i M)` for every setting, checked to lie in `[-1, 1]`.
pub fn physical_expectations(op: &SamplingOperator, state: &HermitianMatrix) -> Result<Vec<f64>> {
    let scale = op.entry_scale();
    op.forward(state)?
        .into_iter()
        .map(|v| clamp_expectation(v / scale))
        .collect()
}

fn clamp_expectation(p: f64) -> Result<f64> {
    if !p.is_finite() || p.abs() > 1.0 + EXPECTATION_TOL {
        return Err(Error::NonPhysical(alloc::format!(
            "Pauli expectation {p} outside [-1, 1]"
        )));
    }
    Ok(p.clamp(-1.0, 1.0))
}

/// Gaussian noise level matching `t`-shot data on average:
/// `σ_eff = √(d/m) · √((1 − mean_i p_i²) / t)`.
pub fn effective_sigma(op: &SamplingOperator, state: &DensityMatrix, shots: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::param("shots", "need at least one shot"));
    }
    let p = physical_expectations(op, state)?;
    let mean_sq = p.iter().map(|v| v * v).sum::<f64>() / p.len() as f64;
    Ok(op.entry_scale() * ((1.0 - mean_sq).max(0.0) / shots as f64).sqrt())
}
