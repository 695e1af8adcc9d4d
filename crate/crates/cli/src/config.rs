//! Experiment configuration (TOML). See `docs/config.md` for the schema.

use std::path::{Path, PathBuf};

use pauli_tomo_core::analysis::BoundConstants;
use pauli_tomo_core::noise::NoiseModel;
use pauli_tomo_core::solvers::{SolverConfig, StepRule};
use pauli_tomo_core::{PauliLabel, SamplingOperator};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub master_seed: u64,
    #[serde(default = "one")]
    pub trials: usize,
    /// Default result path; `--out` wins. Never written to the sidecar so
    /// that reruns into different files stay byte-identical.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    /// Fill the `wall_time_ms` column. Off by default: timings are the only
    /// non-reproducible output.
    #[serde(default)]
    pub record_timing: bool,
    /// A trial counts as a success when its Frobenius error is below this.
    #[serde(default = "default_success_tol")]
    pub success_tol: f64,
    pub instance: Instance,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub rip: Rip,
    #[serde(default)]
    pub nnq: Nnq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// iid uniform labels, repeats allowed.
    Random,
    /// Uniform labels with repeats rejected.
    Distinct,
    /// All `4^n` labels once each.
    Full,
    /// The `labels` list.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    LowRank,
    /// `(1 − w)·ρ + w·I/d` with `ρ` of rank `r`.
    Mixture,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub n: u32,
    #[serde(default = "one")]
    pub r: usize,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default = "default_basis")]
    pub basis: Basis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// One operator per cell, shared by every trial.
    #[serde(default)]
    pub universality: bool,
    #[serde(default = "default_state")]
    pub state: StateKind,
    #[serde(default = "default_weight")]
    pub mixture_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Exact,
    Gaussian,
    Shots,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Noise {
    pub model: NoiseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
}

impl Default for Noise {
    fn default() -> Self {
        Noise {
            model: NoiseKind::Exact,
            sigma: None,
            shots: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Lasso,
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRuleName {
    Fixed,
    Backtracking,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solver {
    pub kind: SolverKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// `μ = mu_scale · √d · σ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// `λ = lambda_scale · √d · σ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_scale: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_step_rule")]
    pub step_rule: StepRuleName,
    #[serde(default = "yes")]
    pub restart: bool,
    #[serde(default = "yes")]
    pub continuation: bool,
    #[serde(default)]
    pub psd_project: bool,
}

impl Default for Solver {
    fn default() -> Self {
        Solver {
            kind: SolverKind::Lasso,
            mu: Some(1e-6),
            mu_scale: None,
            lambda: None,
            lambda_scale: None,
            max_iters: default_max_iters(),
            rel_tol: default_rel_tol(),
            step_rule: default_step_rule(),
            restart: true,
            continuation: true,
            psd_project: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    #[serde(default = "one_f")]
    pub c0_prime: f64,
    #[serde(default = "one_f")]
    pub c0: f64,
    #[serde(default = "one_f")]
    pub c1: f64,
    #[serde(default = "one_f")]
    pub c2: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            c0_prime: 1.0,
            c0: 1.0,
            c1: 1.0,
            c2: 1.0,
        }
    }
}

impl Bounds {
    pub fn constants(&self) -> BoundConstants {
        BoundConstants {
            c0_prime: self.c0_prime,
            c0: self.c0,
            c1: self.c1,
            c2: self.c2,
        }
    }
}

/// Ranged fields. Every declared range must be non-empty.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rip {
    #[serde(default = "default_rip_samples")]
    pub samples: usize,
    #[serde(default = "default_rip_restarts")]
    pub restarts: usize,
}

impl Default for Rip {
    fn default() -> Self {
        Rip {
            samples: default_rip_samples(),
            restarts: default_rip_restarts(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nnq {
    #[serde(default = "default_nnq_samples")]
    pub samples: usize,
    /// Also check `y = 0`.
    #[serde(default = "yes")]
    pub include_zero: bool,
    #[serde(default = "default_nnq_tol")]
    pub tolerance: f64,
}

impl Default for Nnq {
    fn default() -> Self {
        Nnq {
            samples: default_nnq_samples(),
            include_zero: true,
            tolerance: default_nnq_tol(),
        }
    }
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_success_tol() -> f64 {
    1e-3
}
fn default_basis() -> Basis {
    Basis::Random
}
fn default_state() -> StateKind {
    StateKind::LowRank
}
fn default_weight() -> f64 {
    0.1
}
fn default_max_iters() -> usize {
    5000
}
fn default_rel_tol() -> f64 {
    1e-7
}
fn default_step_rule() -> StepRuleName {
    StepRuleName::Fixed
}
fn default_rip_samples() -> usize {
    200
}
fn default_rip_restarts() -> usize {
    5
}
fn default_nnq_samples() -> usize {
    100
}
fn default_nnq_tol() -> f64 {
    1e-10
}

/// One point of the Cartesian product of the sweep ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub m: usize,
    pub r: usize,
    pub noise: NoiseModel,
}

impl Cell {
    pub fn sigma(&self) -> Option<f64> {
        match self.noise {
            NoiseModel::Gaussian { sigma } => Some(sigma),
            _ => None,
        }
    }

    pub fn shots(&self) -> Option<u64> {
        match self.noise {
            NoiseModel::Shots { shots } => Some(shots),
            _ => None,
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Config = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.trials == 0 {
            return Err(bad("trials must be positive"));
        }
        if !(self.success_tol > 0.0) {
            return Err(bad("success_tol must be positive"));
        }
        let inst = &self.instance;
        if inst.n == 0 || inst.n > 10 {
            return Err(bad("instance.n must lie in 1..=10"));
        }
        if inst.r == 0 || inst.r > self.dim() {
            return Err(bad("instance.r must lie in 1..=d"));
        }
        if !(0.0..=1.0).contains(&inst.mixture_weight) {
            return Err(bad("instance.mixture_weight must lie in [0, 1]"));
        }
        match inst.basis {
            Basis::Random | Basis::Distinct => match inst.m {
                Some(0) => return Err(bad("instance.m must be positive")),
                None if !self.sweeps_m() => return Err(bad("instance.m is required")),
                Some(m) if inst.basis == Basis::Distinct && m as u64 > 4u64.pow(inst.n) => {
                    return Err(bad("instance.m exceeds 4^n distinct labels"))
                }
                _ => {}
            },
            Basis::Full | Basis::Explicit => {
                if self.sweeps_m() {
                    return Err(bad("an m range needs basis = random or distinct"));
                }
                if inst.m.is_some() {
                    return Err(bad("instance.m is implied by this basis"));
                }
            }
        }
        if inst.basis == Basis::Explicit {
            let labels = inst
                .labels
                .as_ref()
                .ok_or_else(|| bad("basis = explicit needs instance.labels"))?;
            self.explicit_labels()?;
            if labels.is_empty() {
                return Err(bad("instance.labels is empty"));
            }
        } else if inst.labels.is_some() {
            return Err(bad("instance.labels needs basis = explicit"));
        }

        let noise = &self.noise;
        match noise.model {
            NoiseKind::Exact => {
                if noise.sigma.is_some() || noise.shots.is_some() {
                    return Err(bad("exact noise takes no sigma or shots"));
                }
            }
            NoiseKind::Gaussian => {
                if noise.shots.is_some() {
                    return Err(bad("gaussian noise takes no shots"));
                }
                if noise.sigma.is_none() && !self.sweeps(|s| s.sigma.is_some()) {
                    return Err(bad("gaussian noise needs noise.sigma"));
                }
            }
            NoiseKind::Shots => {
                if noise.sigma.is_some() {
                    return Err(bad("shot noise takes no sigma"));
                }
                if noise.shots.is_none() && !self.sweeps(|s| s.shots.is_some()) {
                    return Err(bad("shot noise needs noise.shots"));
                }
            }
        }
        if let Some(sigma) = noise.sigma {
            if !(sigma >= 0.0) || !sigma.is_finite() {
                return Err(bad("noise.sigma must be finite and non-negative"));
            }
        }
        if noise.shots == Some(0) {
            return Err(bad("noise.shots must be positive"));
        }

        let s = &self.solver;
        let (abs, scale, other_abs, other_scale, name) = match s.kind {
            SolverKind::Lasso => (s.mu, s.mu_scale, s.lambda, s.lambda_scale, "mu"),
            SolverKind::Dantzig => (s.lambda, s.lambda_scale, s.mu, s.mu_scale, "lambda"),
        };
        if other_abs.is_some() || other_scale.is_some() {
            return Err(bad("regularizer does not match solver.kind"));
        }
        match (abs, scale) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(bad(format!(
                    "give exactly one of solver.{name}, solver.{name}_scale"
                )))
            }
            (Some(v), None) | (None, Some(v)) if !(v >= 0.0) || !v.is_finite() => {
                return Err(bad(format!(
                    "solver.{name} must be finite and non-negative"
                )))
            }
            (Some(v), None) if s.kind == SolverKind::Lasso && v == 0.0 => {
                return Err(bad("solver.mu must be positive"))
            }
            (None, Some(_)) if noise.model == NoiseKind::Exact => {
                return Err(bad("a scaled regularizer needs gaussian or shot noise"))
            }
            _ => {}
        }
        self.solver_config(0)
            .validate()
            .map_err(|e| bad(e.to_string()))?;

        for (name, v) in [
            ("c0_prime", self.bounds.c0_prime),
            ("c0", self.bounds.c0),
            ("c1", self.bounds.c1),
            ("c2", self.bounds.c2),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(bad(format!(
                    "bounds.{name} must be finite and non-negative"
                )));
            }
        }
        if self.rip.samples == 0 || self.rip.restarts == 0 {
            return Err(bad("rip.samples and rip.restarts must be positive"));
        }
        if self.nnq.samples == 0 && !self.nnq.include_zero {
            return Err(bad("nnq needs at least one sample"));
        }
        if !(self.nnq.tolerance > 0.0) {
            return Err(bad("nnq.tolerance must be positive"));
        }

        if let Some(sweep) = &self.sweep {
            let ranges = [
                ("m", sweep.m.as_ref().map(Vec::len)),
                ("sigma", sweep.sigma.as_ref().map(Vec::len)),
                ("r", sweep.r.as_ref().map(Vec::len)),
                ("shots", sweep.shots.as_ref().map(Vec::len)),
            ];
            if ranges.iter().all(|(_, len)| len.is_none()) {
                return Err(bad("sweep declares no ranged field"));
            }
            if let Some((name, _)) = ranges.iter().find(|(_, len)| *len == Some(0)) {
                return Err(bad(format!("sweep.{name} is empty")));
            }
            if sweep.m.iter().flatten().any(|&m| m == 0) {
                return Err(bad("sweep.m values must be positive"));
            }
            if sweep.r.iter().flatten().any(|&r| r == 0 || r > self.dim()) {
                return Err(bad("sweep.r values must lie in 1..=d"));
            }
            if sweep.sigma.is_some() && noise.model != NoiseKind::Gaussian {
                return Err(bad("sweep.sigma needs gaussian noise"));
            }
            if sweep
                .sigma
                .iter()
                .flatten()
                .any(|&s| !(s >= 0.0) || !s.is_finite())
            {
                return Err(bad("sweep.sigma values must be finite and non-negative"));
            }
            if sweep.shots.is_some() && noise.model != NoiseKind::Shots {
                return Err(bad("sweep.shots needs shot noise"));
            }
            if sweep.shots.iter().flatten().any(|&t| t == 0) {
                return Err(bad("sweep.shots values must be positive"));
            }
            if inst.basis == Basis::Distinct
                && sweep
                    .m
                    .iter()
                    .flatten()
                    .any(|&m| m as u64 > 4u64.pow(inst.n))
            {
                return Err(bad("sweep.m exceeds 4^n distinct labels"));
            }
        }
        Ok(())
    }

    fn sweeps(&self, pred: impl Fn(&Sweep) -> bool) -> bool {
        self.sweep.as_ref().is_some_and(pred)
    }

    fn sweeps_m(&self) -> bool {
        self.sweeps(|s| s.m.is_some())
    }

    pub fn dim(&self) -> usize {
        1usize << self.instance.n
    }

    fn explicit_labels(&self) -> Result<Vec<PauliLabel>, CliError> {
        let labels = self.instance.labels.as_deref().unwrap_or_default();
        labels
            .iter()
            .map(|s| {
                let label: PauliLabel = s.parse().map_err(|e| bad(format!("label {s:?}: {e}")))?;
                if label.num_qubits() != self.instance.n {
                    return Err(bad(format!("label {s:?} does not act on n qubits")));
                }
                Ok(label)
            })
            .collect()
    }

    /// The base `m` for this basis.
    fn base_m(&self) -> usize {
        match self.instance.basis {
            Basis::Full => 1 << (2 * self.instance.n),
            Basis::Explicit => self.instance.labels.as_ref().map_or(0, Vec::len),
            _ => self.instance.m.unwrap_or(0),
        }
    }

    /// Cells in row-major order over `m`, `sigma`, `r`, `shots`.
    pub fn cells(&self) -> Vec<Cell> {
        let sweep = self.sweep.clone().unwrap_or_default();
        let ms = sweep.m.unwrap_or_else(|| vec![self.base_m()]);
        let sigmas = sweep
            .sigma
            .unwrap_or_else(|| vec![self.noise.sigma.unwrap_or(0.0)]);
        let rs = sweep.r.unwrap_or_else(|| vec![self.instance.r]);
        let shots = sweep
            .shots
            .unwrap_or_else(|| vec![self.noise.shots.unwrap_or(1)]);
        let mut cells = Vec::new();
        for &m in &ms {
            for &sigma in &sigmas {
                for &r in &rs {
                    for &t in &shots {
                        let noise = match self.noise.model {
                            NoiseKind::Exact => NoiseModel::Exact,
                            NoiseKind::Gaussian => NoiseModel::Gaussian { sigma },
                            NoiseKind::Shots => NoiseModel::Shots { shots: t },
                        };
                        cells.push(Cell {
                            index: cells.len(),
                            m,
                            r,
                            noise,
                        });
                    }
                }
            }
        }
        cells
    }

    pub fn operator(&self, m: usize, seed: u64) -> pauli_tomo_core::Result<SamplingOperator> {
        let n = self.instance.n;
        match self.instance.basis {
            Basis::Random => SamplingOperator::draw(n, m, seed),
            Basis::Distinct => SamplingOperator::draw_distinct(n, m, seed),
            Basis::Full => SamplingOperator::full_basis(n),
            Basis::Explicit => SamplingOperator::from_labels(
                self.explicit_labels().expect("labels validated at load"),
            ),
        }
    }

    /// Whether the operator depends on a seed at all.
    pub fn operator_is_random(&self) -> bool {
        matches!(self.instance.basis, Basis::Random | Basis::Distinct)
    }

    /// Regularization weight for a trial whose noise level is `sigma`.
    pub fn regularizer(&self, sigma: f64) -> f64 {
        let s = &self.solver;
        let root_d = (self.dim() as f64).sqrt();
        match (s.mu.or(s.lambda), s.mu_scale.or(s.lambda_scale)) {
            (Some(v), _) => v,
            (None, Some(k)) => k * root_d * sigma,
            (None, None) => unreachable!("validated at load"),
        }
    }

    pub fn solver_config(&self, seed: u64) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            max_iters: s.max_iters,
            rel_tol: s.rel_tol,
            step_rule: match s.step_rule {
                StepRuleName::Fixed => StepRule::Fixed,
                StepRuleName::Backtracking => StepRule::Backtracking,
            },
            restart: s.restart,
            psd_project: s.psd_project,
            continuation: s.continuation,
            seed,
            ..SolverConfig::default()
        }
    }
}
