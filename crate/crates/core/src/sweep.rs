//! Steady-state observables over grids of cavity decay rate, coupling and pump.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::CorrelationToggles;
use crate::model::{ModelParams, ReferenceRabi, ValidationReport};
use crate::observables::{observables_of, Observables};
use crate::solver::{steady_state, IntegrationConfig, SolverError};

/// Default g²(0) threshold separating antibunched from bunched output.
pub const DEFAULT_G2_THRESHOLD: f64 = 0.1;
/// Default output rate separating weak-cavity from Purcell-enhanced emission, ps⁻¹.
pub const DEFAULT_RATE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("grid axis `{0}` is empty")]
    EmptyAxis(&'static str),
    #[error("grid axis `{axis}` has non-positive or non-finite value {value}")]
    BadValue { axis: &'static str, value: f64 },
    #[error(transparent)]
    InvalidBase(#[from] ValidationReport),
    #[error("invalid integration config: {0}")]
    InvalidConfig(String),
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("records mix pump values {0} and {1}")]
    MixedPump(f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    /// Cavity decay rates 2γ_c, ps⁻¹.
    pub gamma_cav_values: Vec<f64>,
    /// Couplings as multiples of `reference`.
    pub g_values: Vec<f64>,
    pub pump_values: Vec<f64>,
    pub toggle_variants: Vec<CorrelationToggles>,
    pub reference: ReferenceRabi,
}

/// One point of the Cartesian product.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub gamma_cav: f64,
    pub g_over_omega_r0: f64,
    pub pump: f64,
    pub toggles: CorrelationToggles,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), SweepError> {
        let axes: [(&'static str, &[f64]); 3] = [
            ("gamma_cav", &self.gamma_cav_values),
            ("g", &self.g_values),
            ("pump", &self.pump_values),
        ];
        for (axis, values) in axes {
            if values.is_empty() {
                return Err(SweepError::EmptyAxis(axis));
            }
            if let Some(&value) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(SweepError::BadValue { axis, value });
            }
        }
        if self.toggle_variants.is_empty() {
            return Err(SweepError::EmptyAxis("toggles"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gamma_cav_values.len() * self.g_values.len() * self.pump_values.len() * self.toggle_variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points in lexicographic order: gamma_cav, then g, then pump, then toggles.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.len());
        for &gamma_cav in &self.gamma_cav_values {
            for &g_over_omega_r0 in &self.g_values {
                for &pump in &self.pump_values {
                    for &toggles in &self.toggle_variants {
                        out.push(GridPoint {
                            gamma_cav,
                            g_over_omega_r0,
                            pump,
                            toggles,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub gamma_cav: f64,
    /// 1/gamma_cav, ps.
    pub cavity_lifetime: f64,
    pub g_over_omega_r0: f64,
    pub pump: f64,
    pub toggles: CorrelationToggles,
    /// Missing only when the solver produced no usable state.
    pub observables: Option<Observables>,
    pub converged: bool,
    pub error: Option<String>,
}

/// Parameters of a grid point on top of `base`.
pub fn point_params(point: &GridPoint, base: &ModelParams, reference: ReferenceRabi) -> ModelParams {
    ModelParams {
        g: reference.coupling(point.g_over_omega_r0),
        pump: point.pump,
        ..base.with_gamma_cav(point.gamma_cav)
    }
}

pub fn evaluate_point(
    point: &GridPoint,
    base: &ModelParams,
    cfg: &IntegrationConfig,
    reference: ReferenceRabi,
) -> SweepRecord {
    let params = point_params(point, base, reference);
    let (observables, converged, error) = match steady_state(&params, point.toggles, cfg) {
        Ok(ss) => (Some(observables_of(&ss.state, &params)), true, None),
        Err(SolverError::NotConverged { state, ref residual, .. }) => (
            Some(observables_of(&state, &params)),
            false,
            Some(format!("not converged, residual {residual:e}")),
        ),
        Err(e) => (None, false, Some(e.to_string())),
    };
    SweepRecord {
        gamma_cav: point.gamma_cav,
        cavity_lifetime: 1.0 / point.gamma_cav,
        g_over_omega_r0: point.g_over_omega_r0,
        pump: point.pump,
        toggles: point.toggles,
        observables,
        converged,
        error,
    }
}

fn check(grid: &SweepGrid, base: &ModelParams, cfg: &IntegrationConfig) -> Result<(), SweepError> {
    grid.validate()?;
    base.validate()?;
    cfg.validate().map_err(|e| SweepError::InvalidConfig(e.to_string()))
}

/// Serial sweep.
pub fn run_sweep(
    grid: &SweepGrid,
    base: &ModelParams,
    cfg: &IntegrationConfig,
) -> Result<Vec<SweepRecord>, SweepError> {
    check(grid, base, cfg)?;
    Ok(grid
        .points()
        .iter()
        .map(|p| evaluate_point(p, base, cfg, grid.reference))
        .collect())
}

/// Sweep on a dedicated pool of `workers` threads. Output order matches
/// [`run_sweep`].
pub fn run_sweep_parallel(
    grid: &SweepGrid,
    base: &ModelParams,
    cfg: &IntegrationConfig,
    workers: usize,
) -> Result<Vec<SweepRecord>, SweepError> {
    if workers == 0 {
        return Err(SweepError::NoWorkers);
    }
    if workers == 1 {
        return run_sweep(grid, base, cfg);
    }
    check(grid, base, cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SweepError::ThreadPool(e.to_string()))?;
    let points = grid.points();
    Ok(pool.install(|| {
        points
            .par_iter()
            .map(|p| evaluate_point(p, base, cfg, grid.reference))
            .collect()
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Antibunched, dim output.
    Weak,
    /// Antibunched, bright output.
    Purcell,
    /// Bunched output.
    Strong,
    /// No usable g²(0).
    Unclassified,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Weak => "weak",
            Regime::Purcell => "purcell",
            Regime::Strong => "strong",
            Regime::Unclassified => "unclassified",
        })
    }
}

pub fn classify(observables: &Observables, g2_threshold: f64, rate_threshold: f64) -> Regime {
    match observables.g2_zero.value() {
        None => Regime::Unclassified,
        Some(g2) if g2 > g2_threshold => Regime::Strong,
        Some(_) if observables.output_rate >= rate_threshold => Regime::Purcell,
        Some(_) => Regime::Weak,
    }
}

/// Labels each record. All records must share one pump value.
pub fn regime_classify(
    records: &[SweepRecord],
    g2_threshold: f64,
    rate_threshold: f64,
) -> Result<Vec<Regime>, SweepError> {
    if let Some(first) = records.first() {
        if let Some(r) = records.iter().find(|r| r.pump != first.pump) {
            return Err(SweepError::MixedPump(first.pump, r.pump));
        }
    }
    Ok(records
        .iter()
        .map(|r| {
            r.observables
                .as_ref()
                .map_or(Regime::Unclassified, |o| classify(o, g2_threshold, rate_threshold))
        })
        .collect())
}
