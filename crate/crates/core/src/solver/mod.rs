//! Time integration of the cluster-expansion equations and steady-state search.

mod stepper;

pub use stepper::{Method, OdeSystem, MIN_STEP};
pub(crate) use stepper::{drive, DriveOptions, Flow, StepFailure};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dynamics::{self, index, CorrelationToggles, DynamicState, STATE_DIM};
use crate::model::{ModelParams, ValidationReport};

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationConfig {
    pub rel_tol: f64,
    /// Absolute tolerance per real component, in the layout of [`dynamics::index`].
    pub abs_tol: [f64; STATE_DIM],
    /// End time of [`integrate`] and time limit of [`steady_state`], ps.
    pub max_time: f64,
    pub initial_step: f64,
    /// Threshold on ‖rhs(y)‖ / max(‖y‖, 1).
    pub steady_state_residual: f64,
    /// Time the residual must stay below threshold, ps.
    pub steady_window: f64,
    pub method: Method,
    /// Adiabatically eliminate the carriers when the pump dominates every other
    /// rate by [`SATURATION_RATIO`].
    pub saturated_pump: bool,
    /// Refine a detected steady state with Newton iterations on rhs(y) = 0.
    pub polish: bool,
    /// Minimum spacing of recorded trajectory samples, ps. Zero records every
    /// accepted step.
    pub record_interval: f64,
}

/// Pump-to-rate ratio above which the saturated-pump mode engages.
pub const SATURATION_RATIO: f64 = 1e3;

/// With polishing on, a steady window opens once the residual drops below this
/// multiple of `rel_tol`.
pub const POLISH_DETECTION: f64 = 100.0;

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: [1e-12; STATE_DIM],
            max_time: 1e4,
            initial_step: 1e-6,
            steady_state_residual: 1e-10,
            steady_window: 10.0,
            method: Method::Auto,
            saturated_pump: false,
            polish: true,
            record_interval: 0.0,
        }
    }
}

impl IntegrationConfig {
    pub fn with_abs_tol(self, abs_tol: f64) -> Self {
        Self {
            abs_tol: [abs_tol; STATE_DIM],
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let mut problems = Vec::new();
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            problems.push(format!("rel_tol = {} must lie in (0, 1)", self.rel_tol));
        }
        if self.abs_tol.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            problems.push("abs_tol entries must be finite and > 0".to_string());
        }
        if !(self.max_time > 0.0) {
            problems.push(format!("max_time = {} must be > 0", self.max_time));
        }
        if !(self.initial_step > 0.0) {
            problems.push(format!("initial_step = {} must be > 0", self.initial_step));
        }
        if !(self.steady_state_residual > 0.0) {
            problems.push(format!(
                "steady_state_residual = {} must be > 0",
                self.steady_state_residual
            ));
        }
        if !(self.steady_window > 0.0) {
            problems.push(format!("steady_window = {} must be > 0", self.steady_window));
        }
        if !(self.record_interval >= 0.0) {
            problems.push(format!("record_interval = {} must be >= 0", self.record_interval));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SolverError::InvalidConfig(problems.join("; ")))
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    InvalidParams(#[from] ValidationReport),
    #[error("invalid integration config: {0}")]
    InvalidConfig(String),
    #[error("step size collapsed to {step:e} ps at t = {time} ps")]
    StiffnessFailure { time: f64, step: f64 },
    #[error("state became non-finite at t = {time} ps")]
    NonFiniteState { time: f64 },
    #[error("no steady state within {max_time} ps (last residual {residual:e})")]
    NotConverged {
        max_time: f64,
        state: DynamicState,
        residual: f64,
    },
}

/// A state outside the physical simplex, widened by `10·rel_tol`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeViolation {
    pub time: f64,
    pub field: &'static str,
    pub value: f64,
}

/// Range violations are counted in full but only the first few are kept.
const MAX_KEPT_VIOLATIONS: usize = 16;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub violations: Vec<RangeViolation>,
    pub violation_count: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Diagnostics {
    fn check(&mut self, time: f64, state: &DynamicState, slack: f64) {
        let mut flag = |field: &'static str, value: f64| {
            self.violation_count += 1;
            if self.violations.len() < MAX_KEPT_VIOLATIONS {
                self.violations.push(RangeViolation { time, field, value });
            }
        };
        if state.n_e < -slack || state.n_e > 1.0 + slack {
            flag("n_e", state.n_e);
        }
        if state.n_h < -slack || state.n_h > 1.0 + slack {
            flag("n_h", state.n_h);
        }
        if state.n_p < -slack {
            flag("n_p", state.n_p);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DynamicState>,
    /// Whether the final state satisfies the steady-state residual threshold.
    pub converged: bool,
    pub final_residual: f64,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn final_state(&self) -> &DynamicState {
        self.states.last().expect("a trajectory holds at least the initial state")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub state: DynamicState,
    /// Time at which the residual dropped below threshold for good, ps.
    pub time: f64,
    pub residual: f64,
    /// True when Newton refinement replaced the integrated state.
    pub polished: bool,
    pub saturated_pump: bool,
    pub diagnostics: Diagnostics,
}

/// ‖rhs(y)‖ / max(‖y‖, 1).
pub fn scaled_residual(state: &DynamicState, params: &ModelParams, toggles: CorrelationToggles) -> f64 {
    dynamics::rhs(state, params, toggles).norm() / state.norm().max(1.0)
}

/// The full cluster-expansion system over the flat real layout.
pub struct ClusterSystem {
    pub params: ModelParams,
    pub toggles: CorrelationToggles,
}

impl OdeSystem for ClusterSystem {
    fn dim(&self) -> usize {
        STATE_DIM
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let d = dynamics::rhs(&DynamicState::from_slice(y), &self.params, self.toggles);
        dy.copy_from_slice(&d.to_array());
    }

    fn jacobian(&self, y: &[f64], jac: &mut DMatrix<f64>) {
        let j = dynamics::jacobian(&DynamicState::from_slice(y), &self.params, self.toggles);
        jac.copy_from(&j);
    }
}

/// Cluster-expansion system with the carriers slaved to the polarization: n_e =
/// n_h = n solves P(1 − n) − γ_nr·n − γ_nl·n² − 2g·Re(p) = 0. Only the eight
/// photon and correlation components are integrated.
pub struct SaturatedSystem {
    pub params: ModelParams,
    pub toggles: CorrelationToggles,
}

const SATURATED_DIM: usize = STATE_DIM - 2;

impl SaturatedSystem {
    pub fn carrier_population(&self, p_re: f64) -> f64 {
        let ModelParams {
            g,
            gamma_nr,
            gamma_nl,
            pump,
            ..
        } = self.params;
        let b = pump + gamma_nr;
        let c = pump - 2.0 * g * p_re;
        2.0 * c / (b + (b * b + 4.0 * gamma_nl * c).sqrt())
    }

    pub fn expand(&self, reduced: &[f64]) -> DynamicState {
        let mut full = [0.0; STATE_DIM];
        full[2..].copy_from_slice(reduced);
        let n = self.carrier_population(full[index::P_RE]);
        full[index::N_E] = n;
        full[index::N_H] = n;
        DynamicState::from_slice(&full)
    }

    pub fn reduce(state: &DynamicState) -> [f64; SATURATED_DIM] {
        let full = state.to_array();
        let mut out = [0.0; SATURATED_DIM];
        out.copy_from_slice(&full[2..]);
        out
    }
}

impl OdeSystem for SaturatedSystem {
    fn dim(&self) -> usize {
        SATURATED_DIM
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let d = dynamics::rhs(&self.expand(y), &self.params, self.toggles);
        dy.copy_from_slice(&d.to_array()[2..]);
    }
}

/// True when the saturated-pump reduction is both requested and justified.
pub fn saturation_applies(params: &ModelParams, cfg: &IntegrationConfig) -> bool {
    let others = [
        params.g,
        params.gamma_c,
        params.gamma_deph,
        params.gamma_nr,
        params.gamma_nl,
        params.detuning.abs(),
    ];
    cfg.saturated_pump
        && params.pump > 0.0
        && others.iter().all(|r| params.pump >= SATURATION_RATIO * r)
}

/// Ratio of the pump to the next-largest rate beyond which `Method::Auto` picks
/// the Rosenbrock scheme.
const STIFFNESS_RATIO: f64 = 100.0;

fn resolve_method(params: &ModelParams, cfg: &IntegrationConfig, reduced: bool) -> Method {
    match cfg.method {
        Method::Auto => {
            let others = [
                params.g,
                params.gamma_c,
                params.gamma_deph,
                params.gamma_nr,
                params.gamma_nl,
                params.detuning.abs(),
            ];
            let slow = others.iter().cloned().fold(1e-300, f64::max);
            if !reduced && params.pump > STIFFNESS_RATIO * slow {
                Method::Rosenbrock
            } else {
                Method::DormandPrince
            }
        }
        m => m,
    }
}

fn check_inputs(params: &ModelParams, cfg: &IntegrationConfig) -> Result<(), SolverError> {
    params.validate()?;
    cfg.validate()
}

fn step_error(failure: StepFailure) -> SolverError {
    match failure {
        StepFailure::Collapse { t, h, .. } => SolverError::StiffnessFailure { time: t, step: h },
        StepFailure::NonFinite { t, .. } => SolverError::NonFiniteState { time: t },
    }
}

/// Drives either the full or the reduced system, reporting full states.
fn run_cluster(
    initial: &DynamicState,
    params: &ModelParams,
    toggles: CorrelationToggles,
    cfg: &IntegrationConfig,
    max_step: f64,
    mut on_accept: impl FnMut(f64, &DynamicState) -> Flow,
) -> Result<(DynamicState, usize, usize), SolverError> {
    let reduced = saturation_applies(params, cfg);
    let method = resolve_method(params, cfg, reduced);
    if reduced {
        let sys = SaturatedSystem {
            params: *params,
            toggles,
        };
        let opts = DriveOptions {
            method,
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol[2..].to_vec(),
            initial_step: cfg.initial_step,
            max_step,
        };
        let out = drive(&sys, &SaturatedSystem::reduce(initial), cfg.max_time, &opts, |t, y| {
            on_accept(t, &sys.expand(y))
        })
        .map_err(step_error)?;
        Ok((sys.expand(&out.y), out.accepted, out.rejected))
    } else {
        let sys = ClusterSystem {
            params: *params,
            toggles,
        };
        let opts = DriveOptions {
            method,
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol.to_vec(),
            initial_step: cfg.initial_step,
            max_step,
        };
        let out = drive(&sys, &initial.to_array(), cfg.max_time, &opts, |t, y| {
            on_accept(t, &DynamicState::from_slice(y))
        })
        .map_err(step_error)?;
        Ok((DynamicState::from_slice(&out.y), out.accepted, out.rejected))
    }
}

/// Integrates from `t = 0` to `cfg.max_time`, recording accepted steps.
pub fn integrate(
    initial: &DynamicState,
    params: &ModelParams,
    toggles: CorrelationToggles,
    cfg: &IntegrationConfig,
) -> Result<Trajectory, SolverError> {
    check_inputs(params, cfg)?;
    let initial = if saturation_applies(params, cfg) {
        let sys = SaturatedSystem {
            params: *params,
            toggles,
        };
        sys.expand(&SaturatedSystem::reduce(initial))
    } else {
        *initial
    };
    let slack = 10.0 * cfg.rel_tol;
    let mut diagnostics = Diagnostics::default();
    diagnostics.check(0.0, &initial, slack);
    let mut times = vec![0.0];
    let mut states = vec![initial];
    let mut last_recorded = 0.0;

    let (final_state, accepted, rejected) =
        run_cluster(&initial, params, toggles, cfg, f64::INFINITY, |t, state| {
            diagnostics.check(t, state, slack);
            if t - last_recorded >= cfg.record_interval || t >= cfg.max_time {
                times.push(t);
                states.push(*state);
                last_recorded = t;
            }
            Flow::Continue
        })?;
    if !final_state.is_finite() {
        return Err(SolverError::NonFiniteState {
            time: *times.last().unwrap(),
        });
    }
    diagnostics.accepted_steps = accepted;
    diagnostics.rejected_steps = rejected;
    let final_residual = scaled_residual(&final_state, params, toggles);
    Ok(Trajectory {
        times,
        states,
        converged: final_residual < cfg.steady_state_residual,
        final_residual,
        diagnostics,
    })
}

/// Steady state reached from the vacuum.
pub fn steady_state(
    params: &ModelParams,
    toggles: CorrelationToggles,
    cfg: &IntegrationConfig,
) -> Result<SteadyState, SolverError> {
    steady_state_from(&DynamicState::vacuum(), params, toggles, cfg)
}

/// Integrates until ‖rhs‖ / max(‖y‖, 1) stays below `cfg.steady_state_residual`
/// for `cfg.steady_window` ps and returns the state at the start of that window.
pub fn steady_state_from(
    initial: &DynamicState,
    params: &ModelParams,
    toggles: CorrelationToggles,
    cfg: &IntegrationConfig,
) -> Result<SteadyState, SolverError> {
    check_inputs(params, cfg)?;
    let slack = 10.0 * cfg.rel_tol;
    // Explicit steps near the stability limit leave noise of order rel_tol in
    // the residual; with polishing the window only needs to be approximate.
    let detect = if cfg.polish {
        cfg.steady_state_residual.max(POLISH_DETECTION * cfg.rel_tol)
    } else {
        cfg.steady_state_residual
    };
    let mut diagnostics = Diagnostics::default();
    let mut window: Option<(f64, DynamicState, f64)> = None;
    let mut found: Option<(f64, DynamicState, f64, bool)> = None;
    let mut last = (*initial, scaled_residual(initial, params, toggles));

    if last.1 < detect {
        window = Some((0.0, *initial, last.1));
    }

    let accept_window = |start: (f64, DynamicState, f64)| -> Option<(f64, DynamicState, f64, bool)> {
        let (time, state, residual) = start;
        if cfg.polish {
            if let Some((s, r)) = newton_polish(&state, params, toggles) {
                if r < cfg.steady_state_residual && r <= residual {
                    return Some((time, s, r, true));
                }
            }
        }
        (residual < cfg.steady_state_residual).then_some((time, state, residual, false))
    };

    // At least a handful of residual checks inside every window.
    let max_step = cfg.steady_window / 4.0;
    let (_, accepted, rejected) = run_cluster(initial, params, toggles, cfg, max_step, |t, state| {
        diagnostics.check(t, state, slack);
        let residual = scaled_residual(state, params, toggles);
        last = (*state, residual);
        if residual < detect {
            let start = *window.get_or_insert((t, *state, residual));
            if t - start.0 >= cfg.steady_window {
                found = accept_window(start);
                if found.is_some() {
                    return Flow::Stop;
                }
                window = None;
            }
        } else {
            window = None;
        }
        Flow::Continue
    })?;
    diagnostics.accepted_steps = accepted;
    diagnostics.rejected_steps = rejected;

    let Some((time, state, residual, polished)) = found else {
        return Err(SolverError::NotConverged {
            max_time: cfg.max_time,
            state: last.0,
            residual: last.1,
        });
    };
    Ok(SteadyState {
        state,
        time,
        residual,
        polished,
        saturated_pump: saturation_applies(params, cfg),
        diagnostics,
    })
}

/// Newton iterations on rhs(y) = 0 restricted to the components the toggles
/// evolve. Returns `None` if the Jacobian is singular or the iterate wanders
/// away from the starting point.
fn newton_polish(
    start: &DynamicState,
    params: &ModelParams,
    toggles: CorrelationToggles,
) -> Option<(DynamicState, f64)> {
    let active = if toggles.include_doublets() { STATE_DIM } else { 5 };
    let y0 = start.to_array();
    let scale = start.norm().max(1.0);
    let mut y = y0;
    let mut best = (*start, scaled_residual(start, params, toggles));

    for _ in 0..30 {
        let state = DynamicState::from_slice(&y);
        let f = dynamics::rhs(&state, params, toggles).to_array();
        let j = dynamics::jacobian(&state, params, toggles);
        let jac = DMatrix::from_fn(active, active, |r, c| j[(r, c)]);
        let rhs = DVector::from_fn(active, |r, _| -f[r]);
        let delta = jac.lu().solve(&rhs)?;
        for k in 0..active {
            y[k] += delta[k];
        }
        let shift = y.iter().zip(&y0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if !shift.is_finite() || shift > 1e-3 * scale {
            return None;
        }
        let candidate = DynamicState::from_slice(&y);
        let residual = scaled_residual(&candidate, params, toggles);
        if residual < best.1 {
            best = (candidate, residual);
        } else if delta.norm() <= 4.0 * f64::EPSILON * scale {
            break;
        }
        if delta.norm() <= f64::EPSILON * scale {
            break;
        }
    }
    Some(best)
}

/// One integration step of size `h` with the Rosenbrock scheme, used to check
/// that a steady state is a fixed point of the discretized flow.
pub fn single_step(
    state: &DynamicState,
    params: &ModelParams,
    toggles: CorrelationToggles,
    cfg: &IntegrationConfig,
    h: f64,
) -> Result<DynamicState, SolverError> {
    let cfg = IntegrationConfig {
        max_time: h,
        initial_step: h,
        saturated_pump: false,
        ..cfg.clone()
    };
    check_inputs(params, &cfg)?;
    let (y, _, _) = run_cluster(state, params, toggles, &cfg, h, |_, _| Flow::Continue)?;
    Ok(y)
}
