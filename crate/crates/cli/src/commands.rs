//! The subcommands. Every command writes a CSV of rows plus a JSON sidecar
//! next to it; trials run on a rayon pool and are collected in order.

use std::path::Path;
use std::time::Instant;

use pauli_tomo_core::analysis::{error_report, rip_epsilon_ascent, rip_epsilon_sampled};
use pauli_tomo_core::matrix::{nuclear_norm, random_rank_r_state};
use pauli_tomo_core::noise::{effective_sigma, measure_exact, measure_gaussian, measure_shots};
use pauli_tomo_core::solvers::{dantzig, lasso};
use pauli_tomo_core::{rng_from_seed, DensityMatrix, NoiseModel, SamplingOperator};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Basis, Cell, Config, SolverKind, StateKind};
use crate::output::*;
use crate::seeds::{derive_seed, fingerprint, Stream, SHARED_TRIAL};
use crate::CliError;

/// An operator with the seed it was drawn from, or why it could not be built.
type BuiltOperator = Result<(SamplingOperator, Option<u64>), String>;

pub struct Context<'a> {
    pub config: &'a Config,
    pub out: &'a Path,
    pub pool: rayon::ThreadPool,
    pub verbose: bool,
}

impl Context<'_> {
    fn seed(&self, cell: usize, trial: u64, stream: Stream) -> u64 {
        derive_seed(self.config.master_seed, cell as u64, trial, stream)
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn finish<R: Serialize, S: Serialize>(
        &self,
        command: &'static str,
        rows: &[R],
        operators: Vec<OperatorRecord>,
        summary: S,
    ) -> Result<(), CliError> {
        write_csv(self.out, rows)?;
        let sidecar = Sidecar {
            schema_version: crate::config::SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            config: self.config,
            operators,
            summary,
        };
        let side = sidecar_path(self.out);
        write_json(&side, &sidecar)?;
        self.log(format!(
            "{command}: {} rows -> {} (+ {})",
            rows.len(),
            self.out.display(),
            side.display()
        ));
        Ok(())
    }

    /// Whether all trials of a cell share one operator.
    fn shared_operator(&self) -> bool {
        self.config.instance.universality || !self.config.operator_is_random()
    }

    fn operator_seed(&self, cell: usize, trial: usize) -> Option<u64> {
        if !self.config.operator_is_random() {
            return None;
        }
        let t = if self.shared_operator() {
            SHARED_TRIAL
        } else {
            trial as u64
        };
        Some(self.seed(cell, t, Stream::Operator))
    }

    fn operator(&self, cell: &Cell, trial: usize) -> BuiltOperator {
        let seed = self.operator_seed(cell.index, trial);
        self.config
            .operator(cell.m, seed.unwrap_or(0))
            .map(|op| (op, seed))
            .map_err(|e| e.to_string())
    }

    /// Operators per cell: one shared, or one per trial.
    fn operators(&self, cells: &[Cell]) -> Vec<Vec<BuiltOperator>> {
        let per_cell = if self.shared_operator() {
            1
        } else {
            self.config.trials
        };
        let jobs: Vec<(usize, usize)> = (0..cells.len())
            .flat_map(|c| (0..per_cell).map(move |t| (c, t)))
            .collect();
        let built: Vec<_> = self.pool.install(|| {
            jobs.par_iter()
                .map(|&(c, t)| self.operator(&cells[c], t))
                .collect()
        });
        built.chunks(per_cell).map(<[_]>::to_vec).collect()
    }

    fn operator_records(&self, cells: &[Cell], ops: &[Vec<BuiltOperator>]) -> Vec<OperatorRecord> {
        let shared = self.shared_operator();
        let mut records = Vec::new();
        for (cell, list) in cells.iter().zip(ops) {
            for (t, entry) in list.iter().enumerate() {
                if let Ok((op, seed)) = entry {
                    records.push(OperatorRecord {
                        cell: cell.index,
                        trial: (!shared).then_some(t),
                        n: op.num_qubits(),
                        m: op.num_measurements(),
                        seed: *seed,
                        fingerprint: fingerprint(op),
                    });
                }
            }
        }
        records
    }

    fn state(&self, cell: &Cell, seed: u64) -> pauli_tomo_core::Result<DensityMatrix> {
        let d = self.config.dim();
        let rho = random_rank_r_state(d, cell.r, seed)?;
        match self.config.instance.state {
            StateKind::LowRank => Ok(rho),
            StateKind::Mixture => rho.mix(
                &DensityMatrix::maximally_mixed(d),
                self.config.instance.mixture_weight,
            ),
        }
    }

    fn tasks(&self, cells: &[Cell]) -> Vec<(usize, usize)> {
        (0..cells.len())
            .flat_map(|c| (0..self.config.trials).map(move |t| (c, t)))
            .collect()
    }
}

fn timer(on: bool) -> Option<Instant> {
    on.then(Instant::now)
}

fn elapsed_ms(t: Option<Instant>) -> Option<f64> {
    t.map(|t| t.elapsed().as_secs_f64() * 1e3)
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    Some(if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    })
}

fn noise_tag(model: NoiseModel) -> &'static str {
    match model {
        NoiseModel::Exact => "exact",
        NoiseModel::Gaussian { .. } => "gaussian",
        NoiseModel::Shots { .. } => "shots",
    }
}

#[derive(Debug, Serialize)]
struct CellSummary {
    cell: usize,
    m: usize,
    r: usize,
    sigma: Option<f64>,
    shots: Option<u64>,
    trials: usize,
    failures: usize,
    not_converged: usize,
    successes: usize,
    success_rate: f64,
    median_frobenius_error: Option<f64>,
    median_nuclear_error: Option<f64>,
}

/// `recover` (no sweep) and `sweep` (ranged fields required).
pub fn recover(ctx: &Context, command: &'static str) -> Result<(), CliError> {
    let cells = ctx.config.cells();
    let ops = ctx.operators(&cells);
    let tasks = ctx.tasks(&cells);
    let rows: Vec<RecoveryRow> = ctx.pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, t)| {
                let op = if ctx.shared_operator() {
                    &ops[c][0]
                } else {
                    &ops[c][t]
                };
                recovery_trial(ctx, &cells[c], t, op)
            })
            .collect()
    });
    let summary: Vec<CellSummary> = cells
        .iter()
        .map(|cell| {
            let rows: Vec<&RecoveryRow> = rows.iter().filter(|r| r.cell == cell.index).collect();
            let mut frob: Vec<f64> = rows.iter().filter_map(|r| r.frobenius_error).collect();
            let mut nuc: Vec<f64> = rows.iter().filter_map(|r| r.nuclear_error).collect();
            let successes = rows.iter().filter(|r| r.success).count();
            CellSummary {
                cell: cell.index,
                m: rows.first().map_or(cell.m, |r| r.m),
                r: cell.r,
                sigma: cell.sigma(),
                shots: cell.shots(),
                trials: rows.len(),
                failures: rows.iter().filter(|r| r.status == "failed").count(),
                not_converged: rows.iter().filter(|r| r.status == "not_converged").count(),
                successes,
                success_rate: successes as f64 / rows.len() as f64,
                median_frobenius_error: median(&mut frob),
                median_nuclear_error: median(&mut nuc),
            }
        })
        .collect();
    for s in &summary {
        ctx.log(format!(
            "cell {} (m={}, r={}): {}/{} successes, median frobenius error {:?}",
            s.cell, s.m, s.r, s.successes, s.trials, s.median_frobenius_error
        ));
    }
    let records = ctx.operator_records(&cells, &ops);
    ctx.finish(command, &rows, records, summary)
}

fn recovery_trial(ctx: &Context, cell: &Cell, trial: usize, op: &BuiltOperator) -> RecoveryRow {
    let cfg = ctx.config;
    let clock = timer(cfg.record_timing);
    let seed_state = ctx.seed(cell.index, trial as u64, Stream::State);
    let seed_noise = ctx.seed(cell.index, trial as u64, Stream::Noise);
    let seed_solver = ctx.seed(cell.index, trial as u64, Stream::Solver);
    let mut row = RecoveryRow {
        cell: cell.index,
        trial,
        n: cfg.instance.n,
        d: cfg.dim(),
        r: cell.r,
        m: cell.m,
        noise: noise_tag(cell.noise),
        sigma: cell.sigma(),
        shots: cell.shots(),
        sigma_eff: None,
        solver: match cfg.solver.kind {
            SolverKind::Lasso => "lasso",
            SolverKind::Dantzig => "dantzig",
        },
        regularizer: None,
        seed_state,
        seed_operator: ctx.operator_seed(cell.index, trial),
        seed_noise,
        operator_fingerprint: None,
        status: "failed",
        message: String::new(),
        nuclear_error: None,
        frobenius_error: None,
        operator_error: None,
        tail_nuclear: None,
        bound_noiseless: None,
        bound_gaussian: None,
        bound_tail: None,
        iterations: None,
        converged: None,
        final_objective: None,
        residual_operator_norm: None,
        success: false,
        wall_time_ms: None,
    };
    if let Err(msg) = fill_recovery(ctx, cell, op, seed_solver, &mut row) {
        row.status = "failed";
        row.message = msg;
    }
    row.wall_time_ms = elapsed_ms(clock);
    row
}

fn fill_recovery(
    ctx: &Context,
    cell: &Cell,
    op: &BuiltOperator,
    seed_solver: u64,
    row: &mut RecoveryRow,
) -> Result<(), String> {
    let cfg = ctx.config;
    let s = |e: pauli_tomo_core::Error| e.to_string();
    let (op, _) = op.as_ref().map_err(Clone::clone)?;
    row.m = op.num_measurements();
    row.operator_fingerprint = Some(fingerprint(op));
    let truth = ctx.state(cell, row.seed_state).map_err(s)?;
    let (y, sigma_level) = match cell.noise {
        NoiseModel::Exact => (measure_exact(op, &truth).map_err(s)?.y, 0.0),
        NoiseModel::Gaussian { sigma } => (
            measure_gaussian(op, &truth, sigma, row.seed_noise)
                .map_err(s)?
                .y,
            sigma,
        ),
        NoiseModel::Shots { shots } => {
            let eff = effective_sigma(op, &truth, shots).map_err(s)?;
            row.sigma_eff = Some(eff);
            (
                measure_shots(op, &truth, shots, row.seed_noise)
                    .map_err(s)?
                    .y,
                eff,
            )
        }
    };
    let reg = cfg.regularizer(sigma_level);
    row.regularizer = Some(reg);
    let solver = cfg.solver_config(seed_solver);
    let result = match cfg.solver.kind {
        SolverKind::Lasso => lasso(op, &y, reg, &solver),
        SolverKind::Dantzig => dantzig(op, &y, reg, &solver),
    }
    .map_err(s)?;
    let report = error_report(
        &truth,
        &result.estimate,
        cell.r,
        sigma_level,
        cfg.bounds.constants(),
    )
    .map_err(s)?;
    row.nuclear_error = Some(report.nuclear_error);
    row.frobenius_error = Some(report.frobenius_error);
    row.operator_error = Some(report.operator_error);
    row.tail_nuclear = Some(report.tail_nuclear);
    row.bound_noiseless = Some(report.bound_rhs_noiseless);
    row.bound_gaussian = Some(report.bound_rhs_gaussian);
    row.bound_tail = Some(report.bound_rhs_tail);
    row.iterations = Some(result.iterations);
    row.converged = Some(result.converged);
    row.final_objective = Some(result.final_objective);
    row.residual_operator_norm = Some(result.residual_operator_norm);
    row.success = report.frobenius_error < cfg.success_tol;
    row.status = if result.converged {
        "ok"
    } else {
        "not_converged"
    };
    Ok(())
}

#[derive(Debug, Serialize)]
struct RipSummary {
    cell: usize,
    m: usize,
    r: usize,
    median_epsilon_sampled: Option<f64>,
    median_epsilon_ascent: Option<f64>,
}

pub fn rip(ctx: &Context) -> Result<(), CliError> {
    if let Some(sweep) = &ctx.config.sweep {
        if sweep.sigma.is_some() || sweep.shots.is_some() {
            return Err(CliError::Config("rip sweeps only m and r".into()));
        }
    }
    let cfg = ctx.config;
    let cells = cfg.cells();
    let ops = ctx.operators(&cells);
    let tasks = ctx.tasks(&cells);
    let rows: Vec<RipRow> = ctx.pool.install(|| {
        tasks
            .par_iter()
            .flat_map_iter(|&(c, t)| {
                let op = if ctx.shared_operator() {
                    &ops[c][0]
                } else {
                    &ops[c][t]
                };
                rip_trial(ctx, &cells[c], t, op)
            })
            .collect()
    });
    let summary: Vec<RipSummary> = cells
        .iter()
        .map(|cell| {
            let pick = |tag: &str| {
                let mut v: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.cell == cell.index && r.method == tag)
                    .filter_map(|r| r.epsilon_hat)
                    .collect();
                median(&mut v)
            };
            RipSummary {
                cell: cell.index,
                m: cell.m,
                r: cell.r,
                median_epsilon_sampled: pick("sampled"),
                median_epsilon_ascent: pick("ascent"),
            }
        })
        .collect();
    let records = ctx.operator_records(&cells, &ops);
    ctx.finish("rip", &rows, records, summary)
}

fn rip_trial(ctx: &Context, cell: &Cell, trial: usize, op: &BuiltOperator) -> Vec<RipRow> {
    let cfg = ctx.config;
    let seed = ctx.seed(cell.index, trial as u64, Stream::Rip);
    let base = RipRow {
        cell: cell.index,
        trial,
        n: cfg.instance.n,
        d: cfg.dim(),
        m: cell.m,
        r: cell.r,
        seed_operator: ctx.operator_seed(cell.index, trial),
        operator_fingerprint: String::new(),
        method: "sampled",
        samples: cfg.rip.samples,
        epsilon_hat: None,
        implied_delta: None,
        status: "failed",
        message: String::new(),
        wall_time_ms: None,
    };
    let op = match op {
        Ok((op, _)) => op,
        Err(msg) => {
            let mut sampled = base.clone();
            sampled.message = msg.clone();
            let mut ascent = sampled.clone();
            ascent.method = "ascent";
            ascent.samples = cfg.rip.restarts;
            return vec![sampled, ascent];
        }
    };
    let base = RipRow {
        m: op.num_measurements(),
        operator_fingerprint: fingerprint(op),
        ..base
    };
    let run = |method: &'static str, samples: usize| {
        let clock = timer(cfg.record_timing);
        let est = match method {
            "sampled" => rip_epsilon_sampled(op, cell.r, samples, seed),
            _ => rip_epsilon_ascent(op, cell.r, samples, seed),
        };
        let mut row = RipRow {
            method,
            samples,
            ..base.clone()
        };
        match est {
            Ok(est) => {
                row.epsilon_hat = Some(est.epsilon_hat);
                row.implied_delta = est.implied_delta();
                row.status = "ok";
            }
            Err(e) => row.message = e.to_string(),
        }
        row.wall_time_ms = elapsed_ms(clock);
        row
    };
    vec![
        run("sampled", cfg.rip.samples),
        run("ascent", cfg.rip.restarts),
    ]
}

#[derive(Debug, Serialize)]
struct NnqSummary {
    fingerprint: String,
    radius: f64,
    samples: usize,
    max_nuclear_norm: f64,
    max_residual: f64,
    violations: usize,
}

pub fn nnq(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.config;
    if cfg.sweep.is_some() {
        return Err(CliError::Config("nnq takes no sweep".into()));
    }
    let cell = cfg.cells()[0];
    let op_seed = ctx.seed(0, SHARED_TRIAL, Stream::Operator);
    let n = cfg.instance.n;
    let op = match cfg.instance.basis {
        // Distinct labels are part of the construction.
        Basis::Random | Basis::Distinct => SamplingOperator::draw_distinct(n, cell.m, op_seed),
        _ => cfg.operator(cell.m, op_seed),
    }
    .map_err(|e| CliError::Contract(e.to_string()))?;
    if let Some(pos) = op.first_duplicate() {
        return Err(CliError::Contract(format!(
            "label {} repeats at position {pos}; the preimage construction needs distinct labels",
            op.labels()[pos]
        )));
    }
    let radius = op.nnq_radius();
    let tol = cfg.nnq.tolerance;
    let zero = usize::from(cfg.nnq.include_zero);
    let samples: Vec<usize> = (0..zero + cfg.nnq.samples).collect();
    let rows: Vec<Result<NnqRow, CliError>> = ctx.pool.install(|| {
        samples
            .par_iter()
            .map(|&k| {
                let (y, seed) = if k < zero {
                    (vec![0.0; op.num_measurements()], None)
                } else {
                    let seed = ctx.seed(0, k as u64, Stream::Nnq);
                    let mut rng = rng_from_seed(seed);
                    let g: Vec<f64> = (0..op.num_measurements())
                        .map(|_| StandardNormal.sample(&mut rng))
                        .collect();
                    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    (g.iter().map(|v| v * radius / norm).collect(), Some(seed))
                };
                let pre = op
                    .nnq_preimage(&y)
                    .map_err(|e| CliError::Contract(e.to_string()))?;
                let image = op
                    .forward(&pre.matrix)
                    .map_err(|e| CliError::Contract(e.to_string()))?;
                let residual = image
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let nuclear = nuclear_norm(&pre.matrix);
                Ok(NnqRow {
                    sample: k,
                    seed,
                    y_norm: pre.y_norm,
                    radius,
                    nuclear_norm: nuclear,
                    residual,
                    within_radius: pre.within_radius,
                    ok: nuclear <= 1.0 + tol && residual <= tol,
                })
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let summary = NnqSummary {
        fingerprint: fingerprint(&op),
        radius,
        samples: rows.len(),
        max_nuclear_norm: rows.iter().map(|r| r.nuclear_norm).fold(0.0, f64::max),
        max_residual: rows.iter().map(|r| r.residual).fold(0.0, f64::max),
        violations: rows.iter().filter(|r| !r.ok).count(),
    };
    let record = OperatorRecord {
        cell: 0,
        trial: None,
        n,
        m: op.num_measurements(),
        seed: cfg.operator_is_random().then_some(op_seed),
        fingerprint: fingerprint(&op),
    };
    let violations = summary.violations;
    let (max_nuc, max_res) = (summary.max_nuclear_norm, summary.max_residual);
    ctx.finish("nnq", &rows, vec![record], summary)?;
    ctx.log(format!(
        "nnq: max nuclear norm {max_nuc:e}, max residual {max_res:e}"
    ));
    if violations > 0 {
        return Err(CliError::Contract(format!(
            "{violations} preimages break the contract (max nuclear norm {max_nuc:e}, max residual {max_res:e})"
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CountSummary {
    items: usize,
}

/// Writes the states every recovery trial would use.
pub fn state_gen(ctx: &Context) -> Result<(), CliError> {
    let cells = ctx.config.cells();
    let tasks = ctx.tasks(&cells);
    let states: Vec<Result<Vec<StateRow>, CliError>> = ctx.pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, t)| {
                let seed = ctx.seed(c, t as u64, Stream::State);
                let rho = ctx
                    .state(&cells[c], seed)
                    .map_err(|e| CliError::Contract(e.to_string()))?;
                let d = rho.dim();
                Ok((0..d)
                    .flat_map(|row| (0..d).map(move |col| (row, col)))
                    .map(|(row, col)| StateRow {
                        cell: c,
                        trial: t,
                        seed_state: seed,
                        row,
                        col,
                        re: rho[(row, col)].re,
                        im: rho[(row, col)].im,
                    })
                    .collect())
            })
            .collect()
    });
    let mut rows = Vec::new();
    for s in states {
        rows.extend(s?);
    }
    ctx.finish(
        "state-gen",
        &rows,
        Vec::new(),
        CountSummary { items: tasks.len() },
    )
}

/// Writes the operators every recovery trial would use, one row per label.
pub fn op_gen(ctx: &Context) -> Result<(), CliError> {
    let cells = ctx.config.cells();
    let ops = ctx.operators(&cells);
    let shared = ctx.shared_operator();
    let mut rows = Vec::new();
    for (cell, list) in cells.iter().zip(&ops) {
        for (t, entry) in list.iter().enumerate() {
            let (op, seed) = entry.as_ref().map_err(|e| CliError::Contract(e.clone()))?;
            let fp = fingerprint(op);
            for (position, label) in op.labels().iter().enumerate() {
                rows.push(OperatorRow {
                    cell: cell.index,
                    trial: (!shared).then_some(t),
                    seed_operator: *seed,
                    operator_fingerprint: fp.clone(),
                    position,
                    label_index: label.index(),
                    label: label.to_string(),
                });
            }
        }
    }
    let records = ctx.operator_records(&cells, &ops);
    let items = records.len();
    ctx.finish("op-gen", &rows, records, CountSummary { items })
}
