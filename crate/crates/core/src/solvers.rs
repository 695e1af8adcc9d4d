//! Nuclear-norm recovery: matrix Lasso and matrix Dantzig selector.
//!
//! Both solvers only touch the sampling operator through `A`, `A*` and the
//! fused normal map `A*A`, and start from `X = 0`. With real data `y` every
//! gradient and prox step maps Hermitian matrices to Hermitian matrices, so
//! iterates are kept Hermitian and singular-value operations run on the
//! eigendecomposition.
//!
//! * Lasso, `min ½‖A(X) − y‖² + μ‖X‖_*`: accelerated proximal gradient with
//!   singular-value soft thresholding. With `restart` the momentum is reset
//!   whenever a step would raise the objective and the step is redone from
//!   the last iterate, so the objective sequence is non-increasing.
//! * Dantzig, `min ‖X‖_*` s.t. `‖A*(y − A(X))‖ ≤ λ`: linearized ADMM on the
//!   split `Z = A*y − A*A(X)` with `Z` projected onto the operator-norm ball.
//!   The penalty is self-tuned by residual balancing.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::matrix::{eigh, real_inner, CMatrix, DensityMatrix, HermitianMatrix};
use crate::pauli::check_square;
use crate::sampling::SamplingOperator;
use crate::{rng_from_seed, Error, Result};

/// Safety factor applied to the power-iteration estimate of `‖A*A‖`.
pub const LIPSCHITZ_SAFETY: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `1/L` with `L` from [`estimate_lipschitz`].
    Fixed,
    /// Start at `L = 1` (the mean of `A*A`) and double until the quadratic
    /// upper bound holds.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `‖X_{k+1} − X_k‖_F ≤ rel_tol · ‖X_{k+1}‖_F`.
    pub rel_tol: f64,
    pub step_rule: StepRule,
    pub restart: bool,
    /// Clip the estimate to a density matrix after solving.
    pub psd_project: bool,
    /// Power iterations used for the step size.
    pub lipschitz_iters: usize,
    /// Seed of the power-iteration start.
    pub seed: u64,
    /// Lasso only: warm-started continuation over a decreasing sequence of
    /// `μ` values ending at the requested one.
    pub continuation: bool,
    /// Dantzig with `λ = 0` only: accepted residual, relative to `‖A*y‖`.
    pub feasibility_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 5000,
            rel_tol: 1e-7,
            step_rule: StepRule::Fixed,
            restart: true,
            psd_project: false,
            lipschitz_iters: 100,
            seed: 0,
            continuation: true,
            feasibility_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::param("rel_tol", "must be positive"));
        }
        if self.lipschitz_iters == 0 {
            return Err(Error::param("lipschitz_iters", "must be at least 1"));
        }
        if !(self.feasibility_tol > 0.0) {
            return Err(Error::param("feasibility_tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub estimate: HermitianMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Lasso objective or nuclear norm, at `estimate`.
    pub final_objective: f64,
    /// `‖A*(y − A(estimate))‖`.
    pub residual_operator_norm: f64,
    /// Lasso: `min_G ‖A*(A(M̂) − y) + μG‖_F` over subgradients `G` of the
    /// nuclear norm. Dantzig: final primal residual of the splitting.
    pub optimality_residual: f64,
    /// Objective after every iteration.
    pub objective_history: Vec<f64>,
}

/// Prox of `τ‖·‖_*`: soft-threshold the singular values by `τ`.
pub fn svt_prox(m: &CMatrix, tau: f64) -> Result<CMatrix> {
    if !(tau >= 0.0) {
        return Err(Error::param("tau", "must be non-negative"));
    }
    map_singular_values(m, |s| (s - tau).max(0.0))
}

/// Projection onto `{‖X‖ ≤ λ}`: clip the singular values at `λ`.
pub fn operator_norm_project(m: &CMatrix, lambda: f64) -> Result<CMatrix> {
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda", "must be non-negative"));
    }
    map_singular_values(m, |s| s.min(lambda))
}

fn map_singular_values(m: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    if m.is_empty() {
        return Ok(m.clone());
    }
    let svd = m.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::param("m", "SVD did not converge")),
    };
    let mut scaled = u;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(f(s));
    }
    Ok(scaled * v_t)
}

/// Hermitian soft thresholding. Returns the result and its nuclear norm.
fn hermitian_svt(m: &CMatrix, tau: f64) -> (CMatrix, f64) {
    let eig = eigh(m);
    let shrunk: Vec<f64> = eig
        .values
        .iter()
        .map(|&l| l.signum() * (l.abs() - tau).max(0.0))
        .collect();
    let nuclear = shrunk.iter().map(|v| v.abs()).sum();
    (
        HermitianMatrix::from_eigen(&shrunk, &eig.vectors).into_inner(),
        nuclear,
    )
}

fn hermitian_clip(m: &CMatrix, lambda: f64) -> CMatrix {
    let eig = eigh(m);
    let clipped: Vec<f64> = eig
        .values
        .iter()
        .map(|&l| l.signum() * l.abs().min(lambda))
        .collect();
    HermitianMatrix::from_eigen(&clipped, &eig.vectors).into_inner()
}

fn hermitian_nuclear(m: &CMatrix) -> f64 {
    eigh(m).values.iter().map(|v| v.abs()).sum()
}

fn hermitian_opnorm(m: &CMatrix) -> f64 {
    eigh(m)
        .values
        .iter()
        .fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// Power-iteration estimates of `‖A*A‖`, one Rayleigh quotient per step.
pub fn lipschitz_trace(op: &SamplingOperator, iters: usize, seed: u64) -> Result<Vec<f64>> {
    if iters == 0 {
        return Err(Error::param("iters", "must be at least 1"));
    }
    let d = op.dim();
    let mut rng = rng_from_seed(seed);
    let mut x = crate::matrix::sample_u2(d, d, &mut rng).into_inner();
    let mut trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let bx = op.normal_unchecked(&x);
        let quotient = real_inner(&x, &bx) / real_inner(&x, &x);
        trace.push(quotient);
        let norm = bx.norm();
        if norm == 0.0 {
            break;
        }
        x = bx.unscale(norm);
    }
    Ok(trace)
}

/// Power-iteration estimate of `‖A*A‖`, the Lipschitz constant of the
/// gradient of `½‖A(X) − y‖²`.
pub fn estimate_lipschitz(op: &SamplingOperator, iters: usize, seed: u64) -> Result<f64> {
    let trace = lipschitz_trace(op, iters, seed)?;
    Ok(trace.iter().cloned().fold(0.0, f64::max))
}

/// Clip eigenvalues at zero and renormalize to unit trace.
pub fn psd_project(m: &HermitianMatrix) -> Result<DensityMatrix> {
    let eig = m.eigen();
    let clipped: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    let trace: f64 = clipped.iter().sum();
    if !(trace > 0.0) {
        return Err(Error::NonPhysical(
            "no positive spectrum to normalize".into(),
        ));
    }
    let normalized: Vec<f64> = clipped.iter().map(|l| l / trace).collect();
    let out = HermitianMatrix::from_eigen(&normalized, &eig.vectors);
    DensityMatrix::new(HermitianMatrix::hermitian_part(&out))
}

/// `½‖A(X) − y‖² + μ‖X‖_*`.
pub fn lasso_objective(op: &SamplingOperator, y: &[f64], mu: f64, x: &CMatrix) -> Result<f64> {
    check_square(x, op.dim())?;
    check_data(op, y)?;
    let residual = sq_residual(&op.forward_real(x), y);
    Ok(0.5 * residual + mu * crate::matrix::nuclear_norm(x))
}

fn sq_residual(ax: &[f64], y: &[f64]) -> f64 {
    ax.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn check_data(op: &SamplingOperator, y: &[f64]) -> Result<()> {
    if y.len() != op.num_measurements() {
        return Err(Error::DimensionMismatch {
            expected: op.num_measurements(),
            found: y.len(),
        });
    }
    Ok(())
}

fn relative_change(new: &CMatrix, old: &CMatrix) -> f64 {
    let diff = (new - old).norm();
    if diff == 0.0 {
        return 0.0;
    }
    diff / new.norm().max(f64::MIN_POSITIVE)
}

fn finish(
    op: &SamplingOperator,
    y: &[f64],
    config: &SolverConfig,
    estimate: CMatrix,
) -> Result<(HermitianMatrix, f64)> {
    let estimate = if config.psd_project {
        psd_project(&HermitianMatrix::hermitian_part(&estimate))?.into_hermitian()
    } else {
        HermitianMatrix::hermitian_part(&estimate)
    };
    let residual = op.adjoint_unchecked(
        &op.forward_real(&estimate)
            .iter()
            .zip(y)
            .map(|(a, b)| b - a)
            .collect::<Vec<_>>(),
    );
    Ok((estimate, hermitian_opnorm(&residual)))
}

/// Matrix Lasso by accelerated proximal gradient.
///
/// With `config.continuation` the problem is first solved loosely for a
/// decreasing sequence `μ_0 > μ_1 > … > μ`, each stage warm-started from the
/// previous one; only the final stage at the requested `μ` is run to
/// `rel_tol`, and only its objective values enter `objective_history`.
pub fn lasso(
    op: &SamplingOperator,
    y: &[f64],
    mu: f64,
    config: &SolverConfig,
) -> Result<RecoveryResult> {
    config.validate()?;
    check_data(op, y)?;
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::param("mu", "must be positive"));
    }
    let d = op.dim();
    let aty = op.adjoint_unchecked(y);

    let mut lipschitz = match config.step_rule {
        StepRule::Fixed => {
            LIPSCHITZ_SAFETY * estimate_lipschitz(op, config.lipschitz_iters, config.seed)?
        }
        StepRule::Backtracking => 1.0,
    };
    if !(lipschitz > 0.0) {
        lipschitz = 1.0;
    }

    let mut state = ApgState {
        x: CMatrix::zeros(d, d),
        ax: alloc::vec![0.0; op.num_measurements()],
        lipschitz,
        iterations: 0,
    };

    if config.continuation {
        let mut stage_mu = CONTINUATION_START * hermitian_opnorm(&aty);
        while stage_mu > mu && state.iterations < config.max_iters {
            let budget = config.max_iters - state.iterations;
            apg_stage(
                op,
                y,
                stage_mu,
                &mut state,
                budget,
                CONTINUATION_STAGE_TOL.max(config.rel_tol),
                config,
                None,
            );
            stage_mu *= CONTINUATION_FACTOR;
        }
    }

    let mut history = Vec::new();
    let budget = config.max_iters.saturating_sub(state.iterations).max(1);
    let converged = apg_stage(
        op,
        y,
        mu,
        &mut state,
        budget,
        config.rel_tol,
        config,
        Some(&mut history),
    );

    let optimality = lasso_optimality_residual(op, &state.x, &state.ax, &aty, mu);
    let (estimate, residual_operator_norm) = finish(op, y, config, state.x)?;
    let final_objective =
        0.5 * sq_residual(&op.forward_real(&estimate), y) + mu * hermitian_nuclear(&estimate);
    Ok(RecoveryResult {
        estimate,
        iterations: state.iterations,
        converged,
        final_objective,
        residual_operator_norm,
        optimality_residual: optimality,
        objective_history: history,
    })
}

/// Continuation starts at this fraction of `‖A*y‖` (above it the solution is 0).
const CONTINUATION_START: f64 = 0.5;
const CONTINUATION_FACTOR: f64 = 0.25;
const CONTINUATION_STAGE_TOL: f64 = 1e-4;

struct ApgState {
    x: CMatrix,
    ax: Vec<f64>,
    lipschitz: f64,
    iterations: usize,
}

/// Accelerated proximal gradient at fixed `μ`, warm-started from `state.x`.
/// Returns whether the relative-change test fired within `budget` steps.
#[allow(clippy::too_many_arguments)]
fn apg_stage(
    op: &SamplingOperator,
    y: &[f64],
    mu: f64,
    state: &mut ApgState,
    budget: usize,
    tol: f64,
    config: &SolverConfig,
    mut history: Option<&mut Vec<f64>>,
) -> bool {
    let objective = |ax: &[f64], nuclear: f64| 0.5 * sq_residual(ax, y) + mu * nuclear;
    let gradient = |ax: &[f64]| {
        let r: Vec<f64> = ax.iter().zip(y).map(|(a, b)| a - b).collect();
        op.adjoint_unchecked(&r)
    };
    let mut x = core::mem::replace(&mut state.x, CMatrix::zeros(0, 0));
    let mut ax = core::mem::take(&mut state.ax);
    let mut f_x = objective(&ax, hermitian_nuclear(&x));
    let mut v = x.clone();
    let mut av = ax.clone();
    let mut theta = 1.0f64;
    let mut lipschitz = state.lipschitz;
    let mut converged = false;

    for _ in 0..budget {
        state.iterations += 1;
        let (mut z, mut az, mut f_z) = prox_step(
            op,
            &v,
            &av,
            mu,
            &mut lipschitz,
            config,
            &gradient,
            &objective,
        );
        if config.restart && f_z > f_x {
            theta = 1.0;
            v.clone_from(&x);
            av.clone_from(&ax);
            (z, az, f_z) = prox_step(
                op,
                &v,
                &av,
                mu,
                &mut lipschitz,
                config,
                &gradient,
                &objective,
            );
            if f_z > f_x {
                // Rounding at the optimum; keep the current iterate.
                z.clone_from(&x);
                az.clone_from(&ax);
                f_z = f_x;
            }
        }
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let momentum = (theta - 1.0) / theta_next;
        let change = relative_change(&z, &x);
        v = &z + (&z - &x).scale(momentum);
        av = az
            .iter()
            .zip(&ax)
            .map(|(a, b)| a + momentum * (a - b))
            .collect();
        x = z;
        ax = az;
        f_x = f_z;
        theta = theta_next;
        if let Some(h) = history.as_deref_mut() {
            h.push(f_x);
        }
        if change <= tol {
            converged = true;
            break;
        }
    }
    state.x = x;
    state.ax = ax;
    state.lipschitz = lipschitz;
    converged
}

#[allow(clippy::too_many_arguments)]
fn prox_step(
    op: &SamplingOperator,
    v: &CMatrix,
    av: &[f64],
    mu: f64,
    lipschitz: &mut f64,
    config: &SolverConfig,
    gradient: &impl Fn(&[f64]) -> CMatrix,
    objective: &impl Fn(&[f64], f64) -> f64,
) -> (CMatrix, Vec<f64>, f64) {
    let grad = gradient(av);
    let smooth_v = objective(av, 0.0);
    loop {
        let step = 1.0 / *lipschitz;
        let (z, nuclear) = hermitian_svt(&(v - grad.scale(step)), mu * step);
        let az = op.forward_real(&z);
        if config.step_rule == StepRule::Backtracking {
            let diff = &z - v;
            let model =
                smooth_v + real_inner(&grad, &diff) + 0.5 * *lipschitz * diff.norm_squared();
            let smooth_z = objective(&az, 0.0);
            if smooth_z > model * (1.0 + 1e-12) + 1e-300 && *lipschitz < 1e12 {
                *lipschitz *= 2.0;
                continue;
            }
        }
        let f_z = objective(&az, nuclear);
        return (z, az, f_z);
    }
}

/// Distance from `-A*(A(X) − y)` to `μ ∂‖X‖_*`, in Frobenius norm.
///
/// In the eigenbasis of `X` split into support `s` and kernel `k`, the
/// subgradients are `sign(Λ_s) ⊕ W` with `‖W‖ ≤ 1`, so the distance is
/// `‖R_ss + μ sign(Λ_s)‖² + 2‖R_sk‖² + Σ (σ_i(R_kk) − μ)_+²`.
fn lasso_optimality_residual(
    op: &SamplingOperator,
    x: &CMatrix,
    ax: &[f64],
    aty: &CMatrix,
    mu: f64,
) -> f64 {
    let grad = op.adjoint_unchecked(ax) - aty;
    let eig = eigh(x);
    let scale = eig.values.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    let tol = 1e-9 * scale.max(1e-300);
    let d = x.nrows();
    let support: Vec<usize> = (0..d).filter(|&k| eig.values[k].abs() > tol).collect();
    let kernel: Vec<usize> = (0..d).filter(|&k| eig.values[k].abs() <= tol).collect();
    let rotated = eig.vectors.adjoint() * &grad * &eig.vectors;

    let mut total = 0.0;
    for &i in &support {
        for &j in &support {
            let mut entry = rotated[(i, j)];
            if i == j {
                entry += Complex64::new(mu * eig.values[i].signum(), 0.0);
            }
            total += entry.norm_sqr();
        }
        for &j in &kernel {
            total += 2.0 * rotated[(i, j)].norm_sqr();
        }
    }
    if !kernel.is_empty() {
        let block = CMatrix::from_fn(kernel.len(), kernel.len(), |a, b| {
            rotated[(kernel[a], kernel[b])]
        });
        for l in eigh(&block).values {
            total += (l.abs() - mu).max(0.0).powi(2);
        }
    }
    total.sqrt()
}

/// Matrix Dantzig selector by linearized ADMM with residual balancing.
pub fn dantzig(
    op: &SamplingOperator,
    y: &[f64],
    lambda: f64,
    config: &SolverConfig,
) -> Result<RecoveryResult> {
    config.validate()?;
    check_data(op, y)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::param("lambda", "must be non-negative"));
    }
    let d = op.dim();
    let c = op.adjoint_unchecked(y);
    let c_norm = c.norm();
    let c_op = hermitian_opnorm(&c);
    let feasible_at = |residual: f64| {
        if lambda > 0.0 {
            residual <= lambda * (1.0 + config.rel_tol)
        } else {
            residual <= config.feasibility_tol * c_op.max(f64::MIN_POSITIVE)
        }
    };

    // Zero is optimal whenever it is feasible.
    if c_op <= lambda {
        let (estimate, residual_operator_norm) = finish(op, y, config, CMatrix::zeros(d, d))?;
        return Ok(RecoveryResult {
            final_objective: hermitian_nuclear(&estimate),
            estimate,
            iterations: 0,
            converged: true,
            residual_operator_norm,
            optimality_residual: 0.0,
            objective_history: Vec::new(),
        });
    }

    let b_norm = LIPSCHITZ_SAFETY * estimate_lipschitz(op, config.lipschitz_iters, config.seed)?;
    let step = 1.0 / (b_norm * b_norm);
    let project = |m: &CMatrix| {
        if lambda > 0.0 {
            hermitian_clip(m, lambda)
        } else {
            CMatrix::zeros(d, d)
        }
    };

    let mut rho = 1.0 / c_op;
    let mut x = CMatrix::zeros(d, d);
    let mut bx = CMatrix::zeros(d, d);
    let mut z = project(&c);
    let mut u = CMatrix::zeros(d, d);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut primal = f64::INFINITY;
    let tol = config.rel_tol;

    for k in 0..config.max_iters {
        iterations += 1;
        let coupling = &bx + &z - &c + &u;
        let (x_new, nuclear) = hermitian_svt(
            &(&x - op.normal_unchecked(&coupling).scale(step)),
            step / rho,
        );
        let bx_new = op.normal_unchecked(&x_new);
        let z_new = project(&(&c - &bx_new - &u));
        let gap = &bx_new + &z_new - &c;
        u += &gap;

        // Dual residual of the linearized scheme:
        // ρ [(B² − L²)(X⁺ − X) + B(Z⁺ − Z)].
        let dx = &x_new - &x;
        let shift = &bx_new - &bx + &z_new - &z;
        let dual_vec = op.normal_unchecked(&shift) - dx.unscale(step);
        primal = gap.norm();
        let dual = rho * dual_vec.norm();
        x = x_new;
        bx = bx_new;
        z = z_new;
        history.push(nuclear);

        let primal_scale = c_norm.max(bx.norm()).max(z.norm());
        let dual_scale = rho * op.normal_unchecked(&u).norm();
        if primal <= tol * primal_scale && dual <= tol * dual_scale.max(f64::MIN_POSITIVE) {
            let residual = hermitian_opnorm(&(&c - &bx));
            if feasible_at(residual) {
                converged = true;
                break;
            }
        }

        if k % 10 == 9 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u = u.scale(0.5);
            } else if dual > 10.0 * primal {
                rho *= 0.5;
                u = u.scale(2.0);
            }
        }
    }

    let (estimate, residual_operator_norm) = finish(op, y, config, x)?;
    if converged && !feasible_at(residual_operator_norm) {
        converged = false;
    }
    Ok(RecoveryResult {
        final_objective: hermitian_nuclear(&estimate),
        estimate,
        iterations,
        converged,
        residual_operator_norm,
        optimality_residual: primal,
        objective_history: history,
    })
}
