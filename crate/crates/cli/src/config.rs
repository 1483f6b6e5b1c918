//! Run configuration files.
//!
//! A configuration is a TOML document with the sections `[model]`,
//! `[integration]`, `[toggles]`, `[grid]`, `[output]` and `[oracle]`. Every
//! dimensional key carries its unit in the name (`_per_ps`, `_ps`).
//!
//! ```toml
//! [model]
//! preset = "paperlike-defaults"
//! g_over_omega_r0 = 0.2
//! cavity_lifetime_ps = 1.0
//! pump_per_ps = 1e5
//!
//! [grid]
//! cavity_lifetime_ps = { start = 0.2, stop = 10.0, count = 50, spacing = "log" }
//! g_over_omega_r0 = [0.18, 0.2]
//! toggles = ["full", "no-inversion"]
//!
//! [output]
//! path = "lifetime.csv"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qdcavity_core::dynamics::STATE_DIM;
use qdcavity_core::oracle::DEFAULT_N_MAX;
use qdcavity_core::{CorrelationToggles, IntegrationConfig, Method, ModelParams, ReferenceRabi, SweepGrid};

pub const PAPERLIKE_DEFAULTS: &str = "paperlike-defaults";
/// Relative photon-number agreement required by `oracle-compare` unless
/// configured otherwise.
pub const DEFAULT_AGREEMENT_BAND: f64 = 0.30;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Light-matter coupling as written in the file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// rad/ps.
    Absolute(f64),
    /// Multiple of Ω_R0.
    Relative(f64),
}

/// Cavity loss as written in the file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cavity {
    /// γ_c, so that photons decay at 2γ_c.
    GammaC(f64),
    /// 1/(2γ_c), ps.
    Lifetime(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub preset: Option<String>,
    pub coupling: Coupling,
    pub reference: ReferenceRabi,
    pub cavity: Cavity,
    pub gamma_deph: f64,
    pub gamma_nr: f64,
    pub gamma_nl: f64,
    pub pump: f64,
    pub detuning: f64,
}

impl ModelSpec {
    pub fn g(&self) -> f64 {
        match self.coupling {
            Coupling::Absolute(g) => g,
            Coupling::Relative(m) => self.reference.coupling(m),
        }
    }

    pub fn g_over_omega_r0(&self) -> f64 {
        match self.coupling {
            Coupling::Absolute(g) => g / self.reference.omega_r0(),
            Coupling::Relative(m) => m,
        }
    }

    pub fn params(&self) -> ModelParams {
        let gamma_c = match self.cavity {
            Cavity::GammaC(g) => g,
            Cavity::Lifetime(t) => 0.5 / t,
        };
        ModelParams {
            g: self.g(),
            gamma_c,
            gamma_deph: self.gamma_deph,
            gamma_nr: self.gamma_nr,
            gamma_nl: self.gamma_nl,
            pump: self.pump,
            detuning: self.detuning,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default = "linear")]
    pub spacing: Spacing,
}

fn linear() -> Spacing {
    Spacing::Linear
}

/// A grid axis: explicit values or an evenly spaced range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    List(Vec<f64>),
    Range(RangeSpec),
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::List(v) => v.clone(),
            Axis::Range(r) => {
                if r.count == 1 {
                    return vec![r.start];
                }
                let n = (r.count - 1) as f64;
                (0..r.count)
                    .map(|k| {
                        let f = k as f64 / n;
                        match r.spacing {
                            Spacing::Linear => r.start + f * (r.stop - r.start),
                            Spacing::Log => r.start * (r.stop / r.start).powf(f),
                        }
                    })
                    .collect()
            }
        }
    }

    fn check(&self, key: &str) -> Result<(), String> {
        if let Axis::Range(r) = self {
            if r.count == 0 {
                return Err(format!("{key}: count must be at least 1"));
            }
            if r.spacing == Spacing::Log && !(r.start > 0.0 && r.stop > 0.0) {
                return Err(format!("{key}: log spacing needs positive start and stop"));
            }
        }
        let values = self.values();
        if values.is_empty() {
            return Err(format!("{key}: axis is empty"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(format!("{key}: value {v} must be finite and > 0"));
        }
        Ok(())
    }
}

/// The cavity axis of a sweep, given as decay rates 2γ_c or as lifetimes.
#[derive(Debug, Clone, PartialEq)]
pub enum CavityAxis {
    GammaCav(Axis),
    Lifetime(Axis),
}

impl CavityAxis {
    pub fn gamma_cav_values(&self) -> Vec<f64> {
        match self {
            CavityAxis::GammaCav(a) => a.values(),
            CavityAxis::Lifetime(a) => a.values().into_iter().map(|t| 1.0 / t).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub cavity: CavityAxis,
    pub g_over_omega_r0: Axis,
    pub pump: Axis,
    pub toggles: Vec<CorrelationToggles>,
}

impl GridSpec {
    pub fn sweep_grid(&self, reference: ReferenceRabi) -> SweepGrid {
        SweepGrid {
            gamma_cav_values: self.cavity.gamma_cav_values(),
            g_values: self.g_over_omega_r0.values(),
            pump_values: self.pump.values(),
            toggle_variants: self.toggles.clone(),
            reference,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    JsonLines,
}

impl OutputFormat {
    pub fn label(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::JsonLines => "jsonl",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(OutputFormat::Csv),
            "jsonl" | "json-lines" => Some(OutputFormat::JsonLines),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpec {
    pub n_max: usize,
    pub agreement_band: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_N_MAX,
            agreement_band: DEFAULT_AGREEMENT_BAND,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub integration: IntegrationConfig,
    pub toggles: CorrelationToggles,
    pub grid: Option<GridSpec>,
    pub output: OutputSpec,
    pub oracle: OracleSpec,
}

// File representation.

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    integration: Option<RawIntegration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    toggles: Option<RawToggles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<RawGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<RawOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    oracle: Option<RawOracle>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g_per_ps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g_over_omega_r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_r0_per_ps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_c_per_ps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cavity_lifetime_ps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_deph_per_ps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_nr_per_ps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_nl_per_ps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pump_per_ps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detuning_per_ps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum AbsTol {
    Uniform(f64),
    PerField(Vec<f64>),
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegration {
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_tol: Option<AbsTol>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_time_ps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_step_ps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steady_state_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steady_window_ps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    saturated_pump: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    polish: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    record_interval_ps: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawToggles {
    #[serde(skip_serializing_if = "Option::is_none")]
    include_doublets: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    include_inversion_term: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_cav_per_ps: Option<Axis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cavity_lifetime_ps: Option<Axis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g_over_omega_r0: Option<Axis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pump_per_ps: Option<Axis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    toggles: Option<Vec<String>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    #[serde(skip_serializing_if = "Option::is_none")]
    n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    agreement_band: Option<f64>,
}

/// Line of `key = …` inside `[section]`, 1-based.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (k, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if let Some(header) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = header.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((lhs, _)) = trimmed.split_once('=') {
                if lhs.trim() == key {
                    return Some(k + 1);
                }
            }
        }
    }
    None
}

fn section_line(text: &str, section: &str) -> Option<usize> {
    text.lines()
        .position(|l| l.trim() == format!("[{section}]"))
        .map(|k| k + 1)
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: key_line(self.text, section, key).or_else(|| section_line(self.text, section)),
            message: message.into(),
        }
    }
}

fn model_key(field: &str) -> &'static str {
    match field {
        "g" => "g_per_ps",
        "gamma_c" => "gamma_c_per_ps",
        "gamma_deph" => "gamma_deph_per_ps",
        "gamma_nr" => "gamma_nr_per_ps",
        "gamma_nl" => "gamma_nl_per_ps",
        "pump" => "pump_per_ps",
        _ => "detuning_per_ps",
    }
}

fn parse_toggles(ctx: &Ctx, raw: &Option<RawToggles>) -> Result<CorrelationToggles, ConfigError> {
    let doublets = raw.as_ref().and_then(|t| t.include_doublets).unwrap_or(true);
    let inversion = raw.as_ref().and_then(|t| t.include_inversion_term).unwrap_or(doublets);
    CorrelationToggles::new(doublets, inversion).map_err(|e| ctx.err("toggles", "include_inversion_term", e.to_string()))
}

fn parse_model(ctx: &Ctx, raw: &RawModel) -> Result<ModelSpec, ConfigError> {
    let preset = match raw.preset.as_deref() {
        None => None,
        Some(PAPERLIKE_DEFAULTS) => Some(ModelParams::paperlike_defaults(0.0, 1.0, 0.0)),
        Some(other) => {
            return Err(ctx.err(
                "model",
                "preset",
                format!("unknown preset `{other}` (known: {PAPERLIKE_DEFAULTS})"),
            ))
        }
    };
    let rate = |value: Option<f64>, key: &str, from_preset: Option<f64>| -> Result<f64, ConfigError> {
        value
            .or(from_preset)
            .ok_or_else(|| ctx.err("model", key, format!("{key} is required (or set preset = \"{PAPERLIKE_DEFAULTS}\")")))
    };

    let reference = match raw.omega_r0_per_ps {
        None => ReferenceRabi::default(),
        Some(v) => ReferenceRabi::new(v).map_err(|e| ctx.err("model", "omega_r0_per_ps", e.to_string()))?,
    };
    let coupling = match (raw.g_per_ps, raw.g_over_omega_r0) {
        (Some(g), None) => Coupling::Absolute(g),
        (None, Some(m)) => Coupling::Relative(m),
        (Some(_), Some(_)) => {
            return Err(ctx.err(
                "model",
                "g_over_omega_r0",
                "give exactly one of g_per_ps and g_over_omega_r0, not both",
            ))
        }
        (None, None) => return Err(ctx.err("model", "", "one of g_per_ps or g_over_omega_r0 is required")),
    };
    let cavity = match (raw.gamma_c_per_ps, raw.cavity_lifetime_ps) {
        (Some(g), None) => Cavity::GammaC(g),
        (None, Some(t)) => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ctx.err("model", "cavity_lifetime_ps", format!("cavity_lifetime_ps = {t} must be finite and > 0")));
            }
            Cavity::Lifetime(t)
        }
        (Some(_), Some(_)) => {
            return Err(ctx.err(
                "model",
                "cavity_lifetime_ps",
                "give exactly one of gamma_c_per_ps and cavity_lifetime_ps, not both",
            ))
        }
        (None, None) => return Err(ctx.err("model", "", "one of gamma_c_per_ps or cavity_lifetime_ps is required")),
    };
    let spec = ModelSpec {
        preset: raw.preset.clone(),
        coupling,
        reference,
        cavity,
        gamma_deph: rate(raw.gamma_deph_per_ps, "gamma_deph_per_ps", preset.map(|p| p.gamma_deph))?,
        gamma_nr: rate(raw.gamma_nr_per_ps, "gamma_nr_per_ps", preset.map(|p| p.gamma_nr))?,
        gamma_nl: rate(raw.gamma_nl_per_ps, "gamma_nl_per_ps", preset.map(|p| p.gamma_nl))?,
        pump: rate(raw.pump_per_ps, "pump_per_ps", None)?,
        detuning: rate(raw.detuning_per_ps, "detuning_per_ps", Some(preset.map_or(0.0, |p| p.detuning)))?,
    };
    if let Err(report) = spec.params().validate() {
        let issue = &report.issues[0];
        let key = match (issue.field, spec.coupling, spec.cavity) {
            ("g", Coupling::Relative(_), _) => "g_over_omega_r0",
            ("gamma_c", _, Cavity::Lifetime(_)) => "cavity_lifetime_ps",
            (field, _, _) => model_key(field),
        };
        return Err(ctx.err("model", key, report.to_string()));
    }
    Ok(spec)
}

fn parse_integration(ctx: &Ctx, raw: &Option<RawIntegration>) -> Result<IntegrationConfig, ConfigError> {
    let mut cfg = IntegrationConfig::default();
    let Some(raw) = raw else {
        return Ok(cfg);
    };
    let section = "integration";
    if let Some(v) = raw.rel_tol {
        cfg.rel_tol = v;
    }
    match &raw.abs_tol {
        None => {}
        Some(AbsTol::Uniform(v)) => cfg.abs_tol = [*v; STATE_DIM],
        Some(AbsTol::PerField(v)) => {
            cfg.abs_tol = v.as_slice().try_into().map_err(|_| {
                ctx.err(section, "abs_tol", format!("abs_tol needs 1 or {STATE_DIM} values, got {}", v.len()))
            })?
        }
    }
    if let Some(v) = raw.max_time_ps {
        cfg.max_time = v;
    }
    if let Some(v) = raw.initial_step_ps {
        cfg.initial_step = v;
    }
    if let Some(v) = raw.steady_state_residual {
        cfg.steady_state_residual = v;
    }
    if let Some(v) = raw.steady_window_ps {
        cfg.steady_window = v;
    }
    if let Some(m) = &raw.method {
        cfg.method = Method::from_label(m).ok_or_else(|| {
            ctx.err(section, "method", format!("unknown method `{m}` (auto, dormand-prince, rosenbrock)"))
        })?;
    }
    if let Some(v) = raw.saturated_pump {
        cfg.saturated_pump = v;
    }
    if let Some(v) = raw.polish {
        cfg.polish = v;
    }
    if let Some(v) = raw.record_interval_ps {
        cfg.record_interval = v;
    }
    cfg.validate().map_err(|e| {
        let msg = e.to_string();
        let key = [
            ("rel_tol", "rel_tol"),
            ("abs_tol", "abs_tol"),
            ("max_time", "max_time_ps"),
            ("initial_step", "initial_step_ps"),
            ("steady_state_residual", "steady_state_residual"),
            ("steady_window", "steady_window_ps"),
            ("record_interval", "record_interval_ps"),
        ]
        .iter()
        .find(|(field, _)| msg.contains(&format!("{field} ")))
        .map_or("", |(_, key)| key);
        ctx.err(section, key, msg)
    })?;
    Ok(cfg)
}

fn parse_grid(ctx: &Ctx, raw: &RawGrid, model: &ModelSpec, toggles: CorrelationToggles) -> Result<GridSpec, ConfigError> {
    let section = "grid";
    let cavity = match (&raw.gamma_cav_per_ps, &raw.cavity_lifetime_ps) {
        (Some(a), None) => CavityAxis::GammaCav(a.clone()),
        (None, Some(a)) => CavityAxis::Lifetime(a.clone()),
        (Some(_), Some(_)) => {
            return Err(ctx.err(
                section,
                "cavity_lifetime_ps",
                "give exactly one of gamma_cav_per_ps and cavity_lifetime_ps",
            ))
        }
        (None, None) => CavityAxis::GammaCav(Axis::List(vec![model.params().gamma_cav()])),
    };
    let g = raw
        .g_over_omega_r0
        .clone()
        .unwrap_or_else(|| Axis::List(vec![model.g_over_omega_r0()]));
    let pump = raw.pump_per_ps.clone().unwrap_or_else(|| Axis::List(vec![model.pump]));
    let toggle_list = match &raw.toggles {
        None => vec![toggles],
        Some(labels) => labels
            .iter()
            .map(|l| {
                CorrelationToggles::from_label(l).ok_or_else(|| {
                    ctx.err(section, "toggles", format!("unknown toggle variant `{l}` (full, no-inversion, uncorrelated)"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    if toggle_list.is_empty() {
        return Err(ctx.err(section, "toggles", "toggles: list is empty"));
    }
    let (cavity_key, cavity_axis) = match &cavity {
        CavityAxis::GammaCav(a) => ("gamma_cav_per_ps", a),
        CavityAxis::Lifetime(a) => ("cavity_lifetime_ps", a),
    };
    for (key, axis) in [(cavity_key, cavity_axis), ("g_over_omega_r0", &g), ("pump_per_ps", &pump)] {
        axis.check(key).map_err(|m| ctx.err(section, key, m))?;
    }
    Ok(GridSpec {
        cavity,
        g_over_omega_r0: g,
        pump,
        toggles: toggle_list,
    })
}

fn toml_error(text: &str, e: &toml::de::Error) -> ConfigError {
    ConfigError {
        line: e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1),
        message: e.message().to_string(),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        let ctx = Ctx { text };
        let model = parse_model(&ctx, &raw.model)?;
        let integration = parse_integration(&ctx, &raw.integration)?;
        let toggles = parse_toggles(&ctx, &raw.toggles)?;
        let grid = raw
            .grid
            .as_ref()
            .map(|g| parse_grid(&ctx, g, &model, toggles))
            .transpose()?;
        let output = match &raw.output {
            None => OutputSpec::default(),
            Some(o) => OutputSpec {
                path: o.path.as_ref().map(PathBuf::from),
                format: match &o.format {
                    None => OutputFormat::Csv,
                    Some(f) => OutputFormat::from_label(f)
                        .ok_or_else(|| ctx.err("output", "format", format!("unknown format `{f}` (csv, jsonl)")))?,
                },
            },
        };
        let oracle = match &raw.oracle {
            None => OracleSpec::default(),
            Some(o) => {
                let spec = OracleSpec {
                    n_max: o.n_max.unwrap_or(DEFAULT_N_MAX),
                    agreement_band: o.agreement_band.unwrap_or(DEFAULT_AGREEMENT_BAND),
                };
                if spec.n_max < 1 {
                    return Err(ctx.err("oracle", "n_max", "n_max must be at least 1"));
                }
                if !(spec.agreement_band >= 0.0) {
                    return Err(ctx.err("oracle", "agreement_band", "agreement_band must be >= 0"));
                }
                spec
            }
        };
        Ok(Self {
            model,
            integration,
            toggles,
            grid,
            output,
            oracle,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    /// Canonical text form. Parsing it yields an equal configuration.
    pub fn to_toml(&self) -> String {
        let m = &self.model;
        let (g_per_ps, g_over_omega_r0) = match m.coupling {
            Coupling::Absolute(g) => (Some(g), None),
            Coupling::Relative(r) => (None, Some(r)),
        };
        let (gamma_c_per_ps, cavity_lifetime_ps) = match m.cavity {
            Cavity::GammaC(g) => (Some(g), None),
            Cavity::Lifetime(t) => (None, Some(t)),
        };
        let i = &self.integration;
        let abs_tol = if i.abs_tol.iter().all(|a| *a == i.abs_tol[0]) {
            AbsTol::Uniform(i.abs_tol[0])
        } else {
            AbsTol::PerField(i.abs_tol.to_vec())
        };
        let raw = RawConfig {
            model: RawModel {
                preset: m.preset.clone(),
                g_per_ps,
                g_over_omega_r0,
                omega_r0_per_ps: Some(m.reference.omega_r0()),
                gamma_c_per_ps,
                cavity_lifetime_ps,
                gamma_deph_per_ps: Some(m.gamma_deph),
                gamma_nr_per_ps: Some(m.gamma_nr),
                gamma_nl_per_ps: Some(m.gamma_nl),
                pump_per_ps: Some(m.pump),
                detuning_per_ps: Some(m.detuning),
            },
            integration: Some(RawIntegration {
                rel_tol: Some(i.rel_tol),
                abs_tol: Some(abs_tol),
                max_time_ps: Some(i.max_time),
                initial_step_ps: Some(i.initial_step),
                steady_state_residual: Some(i.steady_state_residual),
                steady_window_ps: Some(i.steady_window),
                method: Some(i.method.label().to_string()),
                saturated_pump: Some(i.saturated_pump),
                polish: Some(i.polish),
                record_interval_ps: Some(i.record_interval),
            }),
            toggles: Some(RawToggles {
                include_doublets: Some(self.toggles.include_doublets()),
                include_inversion_term: Some(self.toggles.include_inversion_term()),
            }),
            grid: self.grid.as_ref().map(|g| {
                let (gamma_cav_per_ps, cavity_lifetime_ps) = match &g.cavity {
                    CavityAxis::GammaCav(a) => (Some(a.clone()), None),
                    CavityAxis::Lifetime(a) => (None, Some(a.clone())),
                };
                RawGrid {
                    gamma_cav_per_ps,
                    cavity_lifetime_ps,
                    g_over_omega_r0: Some(g.g_over_omega_r0.clone()),
                    pump_per_ps: Some(g.pump.clone()),
                    toggles: Some(g.toggles.iter().map(|t| t.label().to_string()).collect()),
                }
            }),
            output: Some(RawOutput {
                path: self.output.path.as_ref().map(|p| p.to_string_lossy().into_owned()),
                format: Some(self.output.format.label().to_string()),
            }),
            oracle: Some(RawOracle {
                n_max: Some(self.oracle.n_max),
                agreement_band: Some(self.oracle.agreement_band),
            }),
        };
        toml::to_string(&raw).expect("configuration serializes")
    }
}
