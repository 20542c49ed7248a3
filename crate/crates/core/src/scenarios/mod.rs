//! Experiment presets, parameter sweeps and their outputs.
//!
//! A scenario expands its configuration into independent runs, executes them
//! on a bounded worker pool and reduces the results to tables, convergence
//! orders and pass/fail verdicts collected in a [`Summary`].

pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bathymetry::Bathymetry;
use crate::diagnostics::{self, DiagnosticsOptions};
use crate::error::{Error, Result};
use crate::models::{Model, ModelKind, ModelParams, ModelState};
use crate::operators::{self, OperatorHandle, OperatorKind, SolverStrategy};
use crate::spectral::{grad_gamma, perp_div, Field, VecField};
use crate::timeloop::{self, StepperConfig, Termination, Trajectory};
use crate::verification::{self, DenseKind};

pub use config::{ExperimentConfig, ScenarioKind};
pub use output::{RunSummary, Summary, Table, Timing, Verdict};

/// Environment variable naming the default output root of the CLI.
pub const OUTPUT_ENV: &str = "PEREGRINE_OUT";

/// How to execute a scenario.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Where to write files; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 picks the number of available cores.
    pub jobs: usize,
}

/// One time integration of a sweep.
#[derive(Clone, Debug)]
struct Job {
    label: String,
    params: ModelParams,
    bath: Bathymetry,
    initial: ModelState,
    stepper: StepperConfig,
    diag: DiagnosticsOptions,
}

struct JobResult {
    summary: RunSummary,
    trajectory: Option<Trajectory>,
    /// Final elevation and velocity.
    final_fields: Option<(Field, Option<VecField>)>,
    seconds: f64,
}

impl JobResult {
    fn completed(&self) -> bool {
        self.summary.termination == Some(Termination::Completed)
    }
}

fn execute(job: &Job) -> JobResult {
    let start = Instant::now();
    let mut summary = RunSummary {
        label: job.label.clone(),
        model: Some(job.params.kind),
        eps: job.params.eps,
        mu: job.params.mu,
        delta: job.stepper.delta,
        termination: None,
        steps: 0,
        final_time: None,
        blowup_time: None,
        message: None,
        metrics: BTreeMap::new(),
    };
    let outcome = Model::new(job.params, &job.bath).and_then(|model| {
        let traj = timeloop::run(&model, &job.initial, &job.stepper, &job.diag)?;
        let zeta = model.elevation(&traj.final_state);
        Ok((traj, zeta))
    });
    let (trajectory, final_fields) = match outcome {
        Ok((traj, zeta)) => {
            summary.termination = Some(traj.termination);
            summary.steps = traj.steps;
            summary.final_time = Some(traj.final_state.time);
            summary.blowup_time = traj.blowup_time;
            summary.message = traj.message.clone();
            let velocity = traj.final_state.velocity.clone();
            (Some(traj), Some((zeta, velocity)))
        }
        Err(e) => {
            log::warn!(target: "peregrine::scenarios", "run {} failed: {e}", job.label);
            summary.message = Some(e.to_string());
            (None, None)
        }
    };
    JobResult {
        summary,
        trajectory,
        final_fields,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

/// Scenario results before they are written out.
struct Collected {
    runs: Vec<RunSummary>,
    tables: BTreeMap<String, Table>,
    orders: BTreeMap<String, f64>,
    verdicts: Vec<Verdict>,
    timing: BTreeMap<String, f64>,
}

impl Collected {
    fn new() -> Self {
        Self {
            runs: Vec::new(),
            tables: BTreeMap::new(),
            orders: BTreeMap::new(),
            verdicts: Vec::new(),
            timing: BTreeMap::new(),
        }
    }
}

struct Writer<'a> {
    dir: Option<&'a Path>,
    cfg: &'a ExperimentConfig,
}

impl Writer<'_> {
    fn run(&self, job: &Job, res: &JobResult) -> Result<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        let Some(traj) = &res.trajectory else { return Ok(()) };
        if self.cfg.output.csv {
            output::write_csv(&dir.join("runs").join(format!("{}.csv", job.label)), &job.diag.modes, &traj.records)?;
        }
        if self.cfg.output.snapshots {
            let snaps = dir.join("snapshots");
            output::write_snapshot(&snaps, &format!("{}_initial", job.label), job.params.kind, &job.initial)?;
            output::write_snapshot(&snaps, &format!("{}_final", job.label), job.params.kind, &traj.final_state)?;
        }
        Ok(())
    }
}

fn run_jobs(pool: &rayon::ThreadPool, jobs: &[Job], writer: &Writer, out: &mut Collected) -> Result<Vec<JobResult>> {
    let results: Vec<JobResult> = pool.install(|| jobs.par_iter().map(execute).collect());
    for (job, res) in jobs.iter().zip(&results) {
        writer.run(job, res)?;
        out.timing.insert(job.label.clone(), res.seconds);
    }
    Ok(results)
}

fn tag(x: f64) -> String {
    format!("{x}")
}

fn all_completed(results: &[JobResult], name: &str) -> Verdict {
    let bad: Vec<String> = results
        .iter()
        .filter(|r| !r.completed())
        .map(|r| {
            format!(
                "{}: {}",
                r.summary.label,
                r.summary.message.as_deref().unwrap_or("did not complete")
            )
        })
        .collect();
    if bad.is_empty() {
        Verdict::new(name, true, None, None, format!("{} runs completed", results.len()))
    } else {
        Verdict::failed(name, bad.join("; "))
    }
}

/// Least-squares slope of `log y` against `log x` (two points allowed).
fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn field_distance(a: &(Field, Option<VecField>), b: &(Field, Option<VecField>)) -> f64 {
    let dz = (&a.0 - &b.0).max_abs();
    let dv = match (&a.1, &b.1) {
        (Some(u), Some(v)) => (u - v).max_abs(),
        _ => 0.0,
    };
    dz.max(dv)
}

fn dispersion(cfg: &ExperimentConfig, pool: &rayon::ThreadPool, w: &Writer, out: &mut Collected) -> Result<()> {
    let grid = cfg.grid()?.build()?;
    let flat = Bathymetry::flat(&grid);
    let initial = cfg.initial()?;
    let config::InitialSpec::Modes { wavenumbers, .. } = initial else {
        return Err(Error::config("initial", "dispersion needs Fourier modes"));
    };
    let diag = DiagnosticsOptions {
        modes: wavenumbers.clone(),
        ..cfg.diagnostics.clone()
    };
    let jobs = cfg
        .sweep
        .mu
        .iter()
        .map(|&mu| {
            let params = ModelParams::new(ModelKind::BoussinesqPeregrine, 0.0, mu);
            Ok(Job {
                label: format!("bp_mu{}", tag(mu)),
                params,
                bath: flat.clone(),
                initial: initial.state(&params, &flat)?,
                stepper: cfg.stepper()?.clone(),
                diag: diag.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let results = run_jobs(pool, &jobs, w, out)?;
    let mut rows = Vec::new();
    for (job, mut res) in jobs.iter().zip(results) {
        let mu = job.params.mu;
        for &k in wavenumbers {
            let name = format!("dispersion[mu={},k={}]", tag(mu), tag(k));
            let predicted = diagnostics::bp_dispersion(k, mu);
            let fit = match &res.trajectory {
                Some(traj) => diagnostics::measure_dispersion(traj, k),
                None => Err(Error::InvalidArgument(res.summary.message.clone().unwrap_or_default())),
            };
            match fit {
                Ok(fit) => {
                    let rel = (fit.omega - predicted).abs() / predicted;
                    rows.push(vec![mu, k, fit.omega, predicted, rel]);
                    res.summary.metrics.insert(format!("omega_k{}", tag(k)), fit.omega);
                    res.summary.metrics.insert(format!("rel_err_k{}", tag(k)), rel);
                    out.verdicts.push(Verdict::at_most(name, rel, cfg.thresholds.dispersion_rel_err));
                }
                Err(e) => out.verdicts.push(Verdict::failed(name, e.to_string())),
            }
        }
        out.runs.push(res.summary);
    }
    out.tables.insert(
        "dispersion".into(),
        Table {
            columns: ["mu", "k", "omega_measured", "omega_predicted", "rel_err"].map(String::from).to_vec(),
            rows,
        },
    );
    Ok(())
}

fn consistency(cfg: &ExperimentConfig, pool: &rayon::ThreadPool, w: &Writer, out: &mut Collected) -> Result<()> {
    let grid = cfg.grid()?.build()?;
    let bath = cfg.bathymetry.build(&grid)?;
    let initial = cfg.initial()?;
    let kinds = [ModelKind::ShallowWater, ModelKind::BoussinesqPeregrine, ModelKind::ModifiedBp];
    let mut jobs = Vec::new();
    for (i, &mu) in cfg.sweep.mu.iter().enumerate() {
        let eps = if cfg.sweep.eps_equals_mu { mu } else { cfg.sweep.eps[i] };
        for kind in kinds {
            let params = ModelParams::new(kind, eps, mu);
            jobs.push(Job {
                label: format!("{}_mu{}", kind.name(), tag(mu)),
                params,
                bath: bath.clone(),
                initial: initial.state(&params, &bath)?,
                stepper: cfg.stepper()?.clone(),
                diag: cfg.diagnostics.clone(),
            });
        }
    }
    let results = run_jobs(pool, &jobs, w, out)?;
    out.verdicts.push(all_completed(&results, "consistency_runs_completed"));
    let mut rows = Vec::new();
    let mut bp_sw = Vec::new();
    let mut bp_mbp = Vec::new();
    let mut results = results.into_iter();
    for (i, &mu) in cfg.sweep.mu.iter().enumerate() {
        let mut triple: Vec<JobResult> = results.by_ref().take(kinds.len()).collect();
        let eps = jobs[i * kinds.len()].params.eps;
        if let (Some(sw), Some(bp), Some(mbp)) = (
            &triple[0].final_fields,
            &triple[1].final_fields,
            &triple[2].final_fields,
        ) {
            let e1 = field_distance(bp, sw);
            let e2 = field_distance(bp, mbp);
            rows.push(vec![mu, eps, e1, e2]);
            bp_sw.push((mu, e1));
            bp_mbp.push((mu, e2));
            triple[1].summary.metrics.insert("diff_vs_sw".into(), e1);
            triple[1].summary.metrics.insert("diff_vs_mbp".into(), e2);
        }
        out.runs.extend(triple.drain(..).map(|r| r.summary));
    }
    out.tables.insert(
        "consistency".into(),
        Table {
            columns: ["mu", "eps", "bp_minus_sw", "bp_minus_mbp"].map(String::from).to_vec(),
            rows,
        },
    );
    for (name, points, threshold) in [
        ("order_bp_sw", &bp_sw, cfg.thresholds.order_bp_sw),
        ("order_bp_mbp", &bp_mbp, cfg.thresholds.order_bp_mbp),
    ] {
        if points.len() != cfg.sweep.mu.len() {
            out.verdicts.push(Verdict::failed(name, "some runs did not finish"));
            continue;
        }
        match diagnostics::estimate_order(points) {
            Ok(order) => {
                out.orders.insert(name.into(), order);
                out.verdicts.push(Verdict::at_least(name, order, threshold));
            }
            Err(e) => out.verdicts.push(Verdict::failed(name, e.to_string())),
        }
    }
    Ok(())
}

fn longtime(cfg: &ExperimentConfig, pool: &rayon::ThreadPool, w: &Writer, out: &mut Collected) -> Result<()> {
    let grid = cfg.grid()?.build()?;
    let bath = cfg.bathymetry.build(&grid)?;
    let initial = cfg.initial()?;
    let horizon = cfg.sweep.horizon.expect("validated");
    let base_mu = cfg.model.as_ref().map(|m| m.mu);
    let rescaled = cfg.model.as_ref().is_some_and(|m| m.rescaled_time);
    let make = |eps: f64, label: String| -> Result<Job> {
        let mu = if cfg.sweep.eps_equals_mu {
            eps
        } else {
            base_mu.ok_or_else(|| Error::config("model.mu", "needed unless `eps_equals_mu` is set"))?
        };
        let params = ModelParams {
            rescaled_time: rescaled,
            ..ModelParams::new(ModelKind::ModifiedBp, eps, mu)
        };
        let mut stepper = cfg.stepper()?.clone();
        // the configured dt is in physical time
        if rescaled {
            stepper.dt *= eps;
            stepper.t_end = horizon;
        } else {
            stepper.t_end = horizon / eps;
        }
        Ok(Job {
            label,
            params,
            bath: bath.clone(),
            initial: initial.state(&params, &bath)?,
            stepper,
            diag: cfg.diagnostics.clone(),
        })
    };
    let mut jobs = cfg
        .sweep
        .eps
        .iter()
        .map(|&eps| make(eps, format!("mbp_eps{}", tag(eps))))
        .collect::<Result<Vec<_>>>()?;
    if let Some(eps) = cfg.sweep.contrast_eps {
        jobs.push(make(eps, format!("contrast_eps{}", tag(eps)))?);
    }
    let results = run_jobs(pool, &jobs, w, out)?;
    let mut rows = Vec::new();
    for (i, mut res) in results.into_iter().enumerate() {
        let contrast = i >= cfg.sweep.eps.len();
        let eps = res.summary.eps;
        let growth = res.trajectory.as_ref().and_then(|traj| {
            let e0 = traj.records.first()?.en;
            let emax = traj.records.iter().map(|r| r.en).fold(f64::NEG_INFINITY, f64::max);
            Some((e0, emax))
        });
        if let Some((e0, emax)) = growth {
            res.summary.metrics.insert("en_initial".into(), e0);
            res.summary.metrics.insert("en_max".into(), emax);
            res.summary.metrics.insert("en_growth".into(), emax / e0);
            rows.push(vec![eps, res.summary.final_time.unwrap_or(0.0), e0, emax, emax / e0]);
        }
        if !contrast {
            let name = format!("longtime[eps={}]", tag(eps));
            match (res.completed(), growth) {
                (true, Some((e0, emax))) => {
                    out.verdicts.push(Verdict::at_most(name, emax / e0, cfg.thresholds.energy_growth))
                }
                _ => out.verdicts.push(Verdict::failed(
                    name,
                    res.summary.message.clone().unwrap_or_else(|| "run did not complete".into()),
                )),
            }
        }
        out.runs.push(res.summary);
    }
    out.tables.insert(
        "longtime".into(),
        Table {
            columns: ["eps", "t_final", "EN_initial", "EN_max", "growth"].map(String::from).to_vec(),
            rows,
        },
    );
    Ok(())
}

fn burgers(cfg: &ExperimentConfig, pool: &rayon::ThreadPool, w: &Writer, out: &mut Collected) -> Result<()> {
    let grid = cfg.grid()?.build()?;
    let flat = Bathymetry::flat(&grid);
    let u0 = cfg.initial()?.elevation(&grid)?;
    let horizon = cfg.sweep.horizon.expect("validated");
    let jobs = cfg
        .sweep
        .eps
        .iter()
        .map(|&eps| {
            let params = ModelParams::new(ModelKind::Burgers, eps, 0.0);
            let stepper = StepperConfig {
                t_end: horizon / eps,
                ..cfg.stepper()?.clone()
            };
            Ok(Job {
                label: format!("burgers_eps{}", tag(eps)),
                params,
                bath: flat.clone(),
                initial: ModelState::new(u0.clone(), None),
                stepper,
                diag: cfg.diagnostics.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let results = run_jobs(pool, &jobs, w, out)?;
    let mut rows = Vec::new();
    let mut detected = Vec::new();
    for mut res in results {
        let eps = res.summary.eps;
        let name = format!("shock_time[eps={}]", tag(eps));
        let predicted = match diagnostics::burgers_shock_time(&u0, eps) {
            Ok(t) => t,
            Err(e) => {
                out.verdicts.push(Verdict::failed(name, e.to_string()));
                out.runs.push(res.summary);
                continue;
            }
        };
        res.summary.metrics.insert("predicted_shock_time".into(), predicted);
        match res.summary.blowup_time {
            Some(t) => {
                let rel = (t - predicted).abs() / predicted;
                res.summary.metrics.insert("shock_rel_err".into(), rel);
                rows.push(vec![eps, predicted, t, rel]);
                detected.push((eps, t));
                out.verdicts.push(Verdict::at_most(name, rel, cfg.thresholds.shock_rel_err));
            }
            None => out.verdicts.push(Verdict::failed(name, "no blow-up detected before the horizon")),
        }
        out.runs.push(res.summary);
    }
    out.tables.insert(
        "burgers".into(),
        Table {
            columns: ["eps", "predicted", "detected", "rel_err"].map(String::from).to_vec(),
            rows,
        },
    );
    if detected.len() >= 2 && detected.len() == cfg.sweep.eps.len() {
        match loglog_slope(&detected) {
            Some(slope) => {
                out.orders.insert("shock_time_slope".into(), slope);
                let tol = cfg.thresholds.shock_slope_tol;
                out.verdicts.push(Verdict::new(
                    "shock_time_slope",
                    (slope + 1.0).abs() <= tol,
                    Some(slope),
                    Some(tol),
                    format!("|{slope:.4} + 1| <= {tol}"),
                ));
            }
            None => out.verdicts.push(Verdict::failed("shock_time_slope", "degenerate eps sweep")),
        }
    } else {
        out.verdicts.push(Verdict::failed("shock_time_slope", "needs at least two detected blow-ups"));
    }
    Ok(())
}

/// Largest relative difference between a dense matrix and matrix-free application.
fn dense_agreement(
    m: &nalgebra::DMatrix<f64>,
    apply: impl Fn(&VecField) -> VecField,
    grid: &crate::spectral::Grid,
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let v = operators::random_vec_field(grid, rng);
        let free = apply(&v);
        let dense = m * nalgebra::DVector::from_vec(v.to_flat());
        let diff = free
            .to_flat()
            .iter()
            .zip(dense.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff / free.max_abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

fn operator_audit(cfg: &ExperimentConfig, out: &mut Collected) -> Result<()> {
    let audit = cfg.audit.as_ref().expect("validated");
    let mu = cfg.model()?.mu;
    let th = &cfg.thresholds;
    let mut rows = Vec::new();
    for (gi, spec) in audit.grids.iter().enumerate() {
        let start = Instant::now();
        let grid = spec.build()?;
        let bath = cfg.bathymetry.build(&grid)?;
        let gtag = format!("d{}n{}", grid.dim(), grid.n());
        for (ki, kind) in [OperatorKind::IPlusMuTb, OperatorKind::HbB, OperatorKind::HbA].into_iter().enumerate() {
            let seed = cfg.seed.wrapping_add((gi * 3 + ki) as u64);
            let label = format!("{kind}@{gtag}");
            let handle = OperatorHandle::new(kind, mu, &bath)?;
            let report = operators::coercivity_report(&handle, audit.trials, seed)?;

            let weighted = verification::assemble_dense(DenseKind::Weighted(kind), mu, &bath)?;
            let scale = weighted.matrix.amax().max(f64::MIN_POSITIVE);
            let symmetry = report.symmetry_residual.max(weighted.asymmetry() / scale);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let agreement = dense_agreement(&weighted.matrix, |v| handle.apply_weighted(v), &grid, audit.trials, &mut rng)?;

            // an independent iterative solve against the factorized one
            let iterative = OperatorHandle::with_strategy(kind, mu, &bath, SolverStrategy::Iterative)?;
            let mut solver_gap = 0.0_f64;
            for _ in 0..audit.trials.min(5) {
                let rhs = operators::random_vec_field(&grid, &mut rng);
                let a = handle.solve(&rhs)?;
                let b = iterative.solve(&rhs)?;
                solver_gap = solver_gap.max((&a - &b).max_abs() / a.max_abs().max(f64::MIN_POSITIVE));
            }

            let min_q = report.min_quotient();
            let mut metrics = BTreeMap::new();
            metrics.insert("symmetry_residual".to_string(), symmetry);
            metrics.insert("min_quotient".to_string(), min_q);
            metrics.insert("max_quotient".to_string(), report.dense_max.unwrap_or(report.sampled_max));
            metrics.insert("inverse_residual".to_string(), report.inverse_residual);
            metrics.insert("dense_agreement".to_string(), agreement);
            metrics.insert("solver_gap".to_string(), solver_gap);
            metrics.insert("h_min".to_string(), report.h_min);

            out.verdicts.push(Verdict::at_most(format!("symmetry[{label}]"), symmetry, th.symmetry));
            out.verdicts.push(Verdict::at_most(format!("inverse[{label}]"), report.inverse_residual, th.inverse));
            out.verdicts.push(Verdict::at_most(format!("dense_agreement[{label}]"), agreement, th.dense_agreement));
            out.verdicts.push(Verdict::at_most(format!("solver_gap[{label}]"), solver_gap, th.inverse));
            if kind != OperatorKind::HbA {
                out.verdicts.push(Verdict::new(
                    format!("coercivity[{label}]"),
                    min_q > 0.0,
                    Some(min_q),
                    Some(0.0),
                    format!("min quotient vs {:?} = {min_q:.6e}", report.norm),
                ));
            }
            if kind == OperatorKind::HbA {
                let constant = operators::gradient_control_constant(&handle, audit.trials, 2.0, seed)?;
                metrics.insert("gradient_control".to_string(), constant);
                if grid.dim() == 2 {
                    let g = operators::random_vec_field(&grid, &mut rng).component(0).clone();
                    let v = handle.solve(&grad_gamma(&g).mul_scalar(bath.depth()))?;
                    let curl = perp_div(&v).max_abs() / v.max_abs().max(f64::MIN_POSITIVE);
                    metrics.insert("curl_of_gradient_solve".to_string(), curl);
                    out.verdicts.push(Verdict::at_most(format!("curl_free[{label}]"), curl, th.inverse));
                }
            }
            rows.push(vec![
                grid.dim() as f64,
                grid.n() as f64,
                ki as f64,
                symmetry,
                min_q,
                report.inverse_residual,
                agreement,
            ]);
            out.runs.push(RunSummary {
                label,
                model: None,
                eps: 0.0,
                mu,
                delta: 0.0,
                termination: None,
                steps: 0,
                final_time: None,
                blowup_time: None,
                message: Some(format!("solver: {}", report.solver)),
                metrics,
            });
        }
        out.timing.insert(gtag, start.elapsed().as_secs_f64());
    }
    out.tables.insert(
        "operator_audit".into(),
        Table {
            columns: ["dim", "n", "operator", "symmetry", "min_quotient", "inverse_residual", "dense_agreement"]
                .map(String::from)
                .to_vec(),
            rows,
        },
    );
    Ok(())
}

fn mollifier_study(cfg: &ExperimentConfig, pool: &rayon::ThreadPool, w: &Writer, out: &mut Collected) -> Result<()> {
    let grid = cfg.grid()?.build()?;
    let bath = cfg.bathymetry.build(&grid)?;
    let params = *cfg.model()?;
    let initial = cfg.initial()?.state(&params, &bath)?;
    let mut deltas = cfg.sweep.delta.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup();
    deltas.push(0.0);
    let jobs: Vec<Job> = deltas
        .iter()
        .map(|&delta| Job {
            label: format!("{}_delta{}", params.kind.name(), tag(delta)),
            params,
            bath: bath.clone(),
            initial: initial.clone(),
            stepper: StepperConfig {
                delta,
                ..cfg.stepper().expect("validated").clone()
            },
            diag: cfg.diagnostics.clone(),
        })
        .collect();
    let results = run_jobs(pool, &jobs, w, out)?;
    out.verdicts.push(all_completed(&results, "mollifier_runs_completed"));
    let reference = results.last().and_then(|r| r.trajectory.as_ref().map(|t| t.final_state.clone()));
    let mut rows = Vec::new();
    let mut diffs = Vec::new();
    let mut results = results;
    for (res, &delta) in results.iter_mut().zip(&deltas) {
        if delta == 0.0 {
            continue;
        }
        if let (Some(reference), Some(traj)) = (&reference, &res.trajectory) {
            let d = traj.final_state.max_diff(reference);
            res.summary.metrics.insert("max_diff_vs_physical".into(), d);
            rows.push(vec![delta, d]);
            diffs.push((delta, d));
        }
    }
    out.runs.extend(results.into_iter().map(|r| r.summary));
    out.tables.insert(
        "mollifier".into(),
        Table {
            columns: ["delta", "max_diff"].map(String::from).to_vec(),
            rows,
        },
    );
    if diffs.len() + 1 != deltas.len() {
        out.verdicts.push(Verdict::failed("mollifier_monotone", "some runs did not finish"));
        out.verdicts.push(Verdict::failed("mollifier_small_delta", "some runs did not finish"));
        return Ok(());
    }
    let monotone = diffs.windows(2).all(|w| w[1].1 < w[0].1);
    let listing: Vec<String> = diffs.iter().map(|(d, e)| format!("{d}: {e:.3e}")).collect();
    out.verdicts.push(Verdict::new("mollifier_monotone", monotone, None, None, listing.join(", ")));
    let (delta, smallest) = *diffs.last().expect("at least one delta");
    out.verdicts.push(Verdict::at_most(
        format!("mollifier_small_delta[delta={}]", tag(delta)),
        smallest,
        cfg.thresholds.mollifier_max_diff,
    ));
    Ok(())
}

/// Runs `cfg`, writes its outputs and returns the summary.
///
/// Errors are reserved for invalid configurations and I/O; failing runs are
/// recorded in the summary.
pub fn run_scenario(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Summary> {
    cfg.validate()?;
    let start = Instant::now();
    let pool = pool(opts.jobs)?;
    let out_dir = opts.out_dir.clone().or_else(|| cfg.output_dir.clone());
    let writer = Writer {
        dir: out_dir.as_deref(),
        cfg,
    };
    let mut out = Collected::new();
    match cfg.scenario {
        ScenarioKind::Dispersion => dispersion(cfg, &pool, &writer, &mut out)?,
        ScenarioKind::Consistency => consistency(cfg, &pool, &writer, &mut out)?,
        ScenarioKind::Longtime => longtime(cfg, &pool, &writer, &mut out)?,
        ScenarioKind::Burgers => burgers(cfg, &pool, &writer, &mut out)?,
        ScenarioKind::OperatorAudit => pool.install(|| operator_audit(cfg, &mut out))?,
        ScenarioKind::MollifierStudy => mollifier_study(cfg, &pool, &writer, &mut out)?,
    }
    let passed = out.verdicts.iter().all(|v| v.passed);
    let summary = Summary {
        scenario: cfg.scenario.name().to_string(),
        seed: cfg.seed,
        parameters: serde_json::to_value(cfg).expect("config serializes"),
        runs: out.runs,
        tables: out.tables,
        orders: out.orders,
        verdicts: out.verdicts,
        passed,
        timing: Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            runs: out.timing,
        },
    };
    if let Some(dir) = &out_dir {
        output::write_summary(&dir.join("summary.json"), &summary)?;
    }
    Ok(summary)
}
