//! Explicit Runge-Kutta integration with stability checks and blow-up detection.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsOptions, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::models::{Model, ModelState, Tendency};
use crate::spectral::{mollify, mollify_vec};

pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rk4,
    Rk2,
}

impl Scheme {
    /// Largest `dt * omega` for which the scheme is (at least marginally) stable
    /// on the imaginary axis; RK2 is only weakly unstable there.
    pub fn stability_limit(&self) -> f64 {
        match self {
            Scheme::Rk4 => 2.8,
            Scheme::Rk2 => 1.0,
        }
    }
}

fn default_stride() -> usize {
    1
}

fn default_threshold() -> f64 {
    DEFAULT_BLOWUP_THRESHOLD
}

fn default_scheme() -> Scheme {
    Scheme::Rk4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Mollifier parameter; 0 integrates the physical system.
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    /// Cap on `|U|_{W^{1,inf}}`.
    #[serde(default = "default_threshold")]
    pub blowup_threshold: f64,
    /// Keep the state at every output time.
    #[serde(default)]
    pub keep_states: bool,
}

impl StepperConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            scheme: Scheme::Rk4,
            delta: 0.0,
            output_stride: 1,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            keep_states: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be >= 0, got {}", self.delta)));
        }
        if self.output_stride == 0 {
            return Err(Error::InvalidArgument("output_stride must be >= 1".into()));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::InvalidArgument("blowup_threshold must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Blowup,
    Dry,
    SolverFailure,
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    /// States at output times when [`StepperConfig::keep_states`] is set.
    pub states: Vec<ModelState>,
    pub final_state: ModelState,
    pub termination: Termination,
    /// Time at which the W^{1,inf} threshold was first exceeded.
    pub blowup_time: Option<f64>,
    pub steps: usize,
    /// Error message attached to an abnormal termination.
    pub message: Option<String>,
    pub mode_wavenumbers: Vec<f64>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    /// Time series of the projection on `cos(k x)` for a recorded wavenumber.
    pub fn mode_series(&self, k: f64) -> Option<Vec<f64>> {
        let idx = self.mode_wavenumbers.iter().position(|&m| (m - k).abs() < 1e-12)?;
        Some(self.records.iter().map(|r| r.mode_amplitudes[idx]).collect())
    }
}

fn stage(model: &Model, state: &ModelState, delta: f64) -> Result<Tendency> {
    model.tendency(state, delta)
}

/// One explicit step of size `dt`.
pub fn step(model: &Model, state: &ModelState, dt: f64, scheme: Scheme, delta: f64) -> Result<ModelState> {
    match scheme {
        Scheme::Rk4 => {
            let k1 = stage(model, state, delta)?;
            let k2 = stage(model, &state.advance(0.5 * dt, &k1), delta)?;
            let k3 = stage(model, &state.advance(0.5 * dt, &k2), delta)?;
            let k4 = stage(model, &state.advance(dt, &k3), delta)?;
            let sum = k1.axpy(2.0, &k2).axpy(2.0, &k3).axpy(1.0, &k4);
            Ok(state.advance(dt, &sum.scale(1.0 / 6.0)))
        }
        Scheme::Rk2 => {
            let k1 = stage(model, state, delta)?;
            let k2 = stage(model, &state.advance(0.5 * dt, &k1), delta)?;
            Ok(state.advance(dt, &k2))
        }
    }
}

/// Rejects time steps beyond the scheme's stability limit for `state`.
pub fn check_cfl(model: &Model, state: &ModelState, config: &StepperConfig) -> Result<()> {
    let omega = model.max_frequency(state);
    let limit = if omega > 0.0 {
        config.scheme.stability_limit() / omega
    } else {
        f64::INFINITY
    };
    if config.dt > limit {
        return Err(Error::Cfl { dt: config.dt, limit });
    }
    Ok(())
}

/// Initial data of the mollified problem, `(1 - delta Delta)^{-1} U_0`.
pub fn mollify_initial(state: &ModelState, delta: f64) -> Result<ModelState> {
    if delta == 0.0 {
        return Ok(state.clone());
    }
    Ok(ModelState {
        surface: mollify(&state.surface, delta, -1)?,
        velocity: state.velocity.as_ref().map(|v| mollify_vec(v, delta, -1)).transpose()?,
        time: state.time,
    })
}

fn classify(err: &Error) -> Option<Termination> {
    match err {
        Error::DryState { .. } | Error::LogDomain { .. } => Some(Termination::Dry),
        Error::SolverDivergence { .. } | Error::NotSpd => Some(Termination::SolverFailure),
        Error::Corrupted(_) => Some(Termination::Blowup),
        _ => None,
    }
}

/// Integrates `initial` to `config.t_end`.
///
/// Returns `Err` only for invalid setups (bad configuration, CFL violation);
/// failures during the run are reported through [`Trajectory::termination`].
pub fn run(model: &Model, initial: &ModelState, config: &StepperConfig, diag: &DiagnosticsOptions) -> Result<Trajectory> {
    config.validate()?;
    if initial.grid() != model.grid() {
        return Err(Error::GridMismatch);
    }
    if !initial.is_finite() {
        return Err(Error::Corrupted("initial state"));
    }
    let mut state = mollify_initial(initial, config.delta)?;
    check_cfl(model, &state, config)?;

    let total = if config.t_end == 0.0 {
        0
    } else {
        (config.t_end / config.dt - 1e-9).ceil() as usize
    };
    let mut records = vec![diagnostics::record(model, &state, diag)];
    let mut states = if config.keep_states { vec![state.clone()] } else { Vec::new() };
    let mut termination = Termination::Completed;
    let mut message = None;
    let mut blowup_time = None;
    let mut steps = 0;
    let mut last_recorded = 0;

    let t0 = state.time;
    for i in 1..=total {
        let t_next = t0 + (i as f64 * config.dt).min(config.t_end);
        let h = t_next - state.time;
        match step(model, &state, h, config.scheme, config.delta) {
            Ok(mut next) => {
                next.time = t_next;
                state = next;
            }
            Err(e) => match classify(&e) {
                Some(t) => {
                    termination = t;
                    if t == Termination::Blowup {
                        blowup_time = Some(t_next);
                    }
                    message = Some(e.to_string());
                    break;
                }
                None => return Err(e),
            },
        }
        steps = i;
        if !state.is_finite() {
            termination = Termination::Blowup;
            blowup_time = Some(state.time);
            message = Some("non-finite values in the state".into());
            break;
        }
        let (sup_u, sup_grad) = diagnostics::w1_inf(model, &state);
        if sup_u.max(sup_grad) > config.blowup_threshold {
            termination = Termination::Blowup;
            blowup_time = Some(state.time);
            message = Some(format!(
                "|U|_W1inf = {:.3e} exceeds {:.3e}",
                sup_u.max(sup_grad),
                config.blowup_threshold
            ));
            break;
        }
        if i % config.output_stride == 0 || i == total {
            records.push(diagnostics::record(model, &state, diag));
            if config.keep_states {
                states.push(state.clone());
            }
            last_recorded = i;
        }
    }
    if termination != Termination::Completed && last_recorded != steps && state.is_finite() {
        records.push(diagnostics::record(model, &state, diag));
        if config.keep_states {
            states.push(state.clone());
        }
    }
    if termination != Termination::Completed {
        log::info!(
            target: "peregrine::timeloop",
            "{} run stopped at t = {:.4}: {:?} ({})",
            model.kind(),
            state.time,
            termination,
            message.as_deref().unwrap_or("")
        );
    }
    Ok(Trajectory {
        records,
        states,
        final_state: state,
        termination,
        blowup_time,
        steps,
        message,
        mode_wavenumbers: diag.modes.clone(),
    })
}
