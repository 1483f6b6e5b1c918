//! Physical parameters, unit conventions and the light-matter coupling strength.
//!
//! Every dynamical rate is expressed in ps⁻¹ and every time in ps. SI units only
//! appear inside [`coupling_strength`], which converts its result back to rad/ps.

use std::f64::consts::TAU;
use std::fmt;

use thiserror::Error;

/// CODATA 2018 values. Not configurable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    /// Elementary charge, C.
    pub electron_charge: f64,
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Vacuum permittivity, F/m.
    pub vacuum_permittivity: f64,
    /// Speed of light in vacuum, m/s.
    pub speed_of_light: f64,
}

pub const CODATA: PhysicalConstants = PhysicalConstants {
    electron_charge: 1.602_176_634e-19,
    hbar: 1.054_571_817e-34,
    vacuum_permittivity: 8.854_187_812_8e-12,
    speed_of_light: 299_792_458.0,
};

const PER_SECOND_TO_PER_PS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{name} = {value} is outside its domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

fn domain(name: &'static str, value: f64, reason: &'static str) -> ModelError {
    ModelError::Domain { name, value, reason }
}

/// How the photon frequency ν entering the coupling formula is derived from the
/// resonant wavelength.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FrequencyConvention {
    /// ν = 2πc/λ (rad/s).
    #[default]
    Angular,
    /// ν = c/λ (Hz).
    Ordinary,
}

/// Geometry and material of the emitter-cavity system, in SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityGeometry {
    /// Resonant vacuum wavelength λ, m.
    pub wavelength: f64,
    /// Background refractive index n_B.
    pub background_index: f64,
    /// Optical mode volume V, m³.
    pub mode_volume: f64,
    /// Dipole length d such that the dipole matrix element is e·d, m.
    pub dipole_length: f64,
}

impl CavityGeometry {
    /// InAs dot at 920 nm in a GaAs-like background (n_B = 3.5), 0.5 nm dipole
    /// length and a (λ/n_B)³ mode volume.
    pub fn reference() -> Self {
        let wavelength = 920e-9;
        let background_index = 3.5;
        Self {
            wavelength,
            background_index,
            mode_volume: mode_volume_cubic(wavelength, background_index)
                .expect("reference geometry is in-domain"),
            dipole_length: 0.5e-9,
        }
    }

    pub fn new(
        wavelength: f64,
        background_index: f64,
        mode_volume: f64,
        dipole_length: f64,
    ) -> Result<Self, ModelError> {
        if !(wavelength > 0.0) {
            return Err(domain("wavelength", wavelength, "must be > 0"));
        }
        if !(background_index >= 1.0) {
            return Err(domain("background_index", background_index, "must be >= 1"));
        }
        if !(mode_volume > 0.0) {
            return Err(domain("mode_volume", mode_volume, "must be > 0"));
        }
        if !(dipole_length >= 0.0) {
            return Err(domain("dipole_length", dipole_length, "must be >= 0"));
        }
        Ok(Self {
            wavelength,
            background_index,
            mode_volume,
            dipole_length,
        })
    }

    pub fn dipole_moment(&self) -> f64 {
        CODATA.electron_charge * self.dipole_length
    }

    pub fn photon_frequency(&self, convention: FrequencyConvention) -> f64 {
        let f = CODATA.speed_of_light / self.wavelength;
        match convention {
            FrequencyConvention::Angular => TAU * f,
            FrequencyConvention::Ordinary => f,
        }
    }

    /// Vacuum Rabi frequency of this geometry in rad/ps.
    pub fn coupling(&self, convention: FrequencyConvention) -> Result<f64, ModelError> {
        coupling_strength(
            self.dipole_moment(),
            self.photon_frequency(convention),
            self.background_index,
            self.mode_volume,
        )
    }
}

/// Mode volume of a cube with the in-material wavelength as its edge, m³.
pub fn mode_volume_cubic(wavelength: f64, background_index: f64) -> Result<f64, ModelError> {
    if !(wavelength > 0.0) {
        return Err(domain("wavelength", wavelength, "must be > 0"));
    }
    if !(background_index >= 1.0) {
        return Err(domain("background_index", background_index, "must be >= 1"));
    }
    Ok((wavelength / background_index).powi(3))
}

/// Light-matter coupling g = ℘·√(ν / (ħ·ε_b·V)) with ε_b = n_B²·ε₀.
///
/// Inputs are SI (C·m, rad/s or Hz, dimensionless, m³); the result is in rad/ps.
pub fn coupling_strength(
    dipole_moment: f64,
    photon_frequency: f64,
    background_index: f64,
    mode_volume: f64,
) -> Result<f64, ModelError> {
    if !(mode_volume > 0.0) {
        return Err(domain("mode_volume", mode_volume, "must be > 0"));
    }
    if !(photon_frequency > 0.0) {
        return Err(domain("photon_frequency", photon_frequency, "must be > 0"));
    }
    if !(background_index >= 1.0) {
        return Err(domain("background_index", background_index, "must be >= 1"));
    }
    if !(dipole_moment >= 0.0) {
        return Err(domain("dipole_moment", dipole_moment, "must be >= 0"));
    }
    let permittivity = background_index * background_index * CODATA.vacuum_permittivity;
    let g = dipole_moment * (photon_frequency / (CODATA.hbar * permittivity * mode_volume)).sqrt();
    Ok(g * PER_SECOND_TO_PER_PS)
}

/// Reference Rabi frequency Ω_R0 against which couplings are quoted, ps⁻¹.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceRabi {
    omega_r0: f64,
}

impl ReferenceRabi {
    pub const DEFAULT_PER_PS: f64 = 0.025;

    pub fn new(omega_r0: f64) -> Result<Self, ModelError> {
        if !(omega_r0 > 0.0) || !omega_r0.is_finite() {
            return Err(domain("omega_r0", omega_r0, "must be finite and > 0"));
        }
        Ok(Self { omega_r0 })
    }

    pub fn omega_r0(&self) -> f64 {
        self.omega_r0
    }

    /// Absolute coupling for a multiple of Ω_R0.
    pub fn coupling(&self, multiple: f64) -> f64 {
        multiple * self.omega_r0
    }
}

impl Default for ReferenceRabi {
    fn default() -> Self {
        Self {
            omega_r0: Self::DEFAULT_PER_PS,
        }
    }
}

/// All rates of one simulation, in ps⁻¹ (rad/ps for `g` and `detuning`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Light-matter coupling.
    pub g: f64,
    /// Half the cavity photon decay rate; photons leave at 2·gamma_c.
    pub gamma_c: f64,
    /// Dephasing of the photon-assisted polarization.
    pub gamma_deph: f64,
    /// Nonradiative carrier loss.
    pub gamma_nr: f64,
    /// Spontaneous emission into free space and non-lasing modes.
    pub gamma_nl: f64,
    /// Carrier injection rate.
    pub pump: f64,
    /// Detuning ω − ν of the transition from the cavity mode.
    pub detuning: f64,
}

impl ModelParams {
    /// Background rates used to reproduce the cavity-lifetime studies. These are
    /// calibration choices, not measured values: γ_nr = 0.001, γ_nl = 0.01 and
    /// γ = 1 ps⁻¹ at zero detuning.
    pub fn paperlike_defaults(g: f64, gamma_c: f64, pump: f64) -> Self {
        Self {
            g,
            gamma_c,
            gamma_deph: 1.0,
            gamma_nr: 0.001,
            gamma_nl: 0.01,
            pump,
            detuning: 0.0,
        }
    }

    /// Photon lifetime 1/(2γ_c) in ps.
    pub fn cavity_lifetime(&self) -> f64 {
        1.0 / (2.0 * self.gamma_c)
    }

    /// Cavity photon decay rate 2γ_c, the quantity labelled γ_cav in sweeps.
    pub fn gamma_cav(&self) -> f64 {
        2.0 * self.gamma_c
    }

    pub fn with_gamma_cav(self, gamma_cav: f64) -> Self {
        Self {
            gamma_c: 0.5 * gamma_cav,
            ..self
        }
    }

    pub fn with_cavity_lifetime(self, lifetime: f64) -> Self {
        Self {
            gamma_c: 0.5 / lifetime,
            ..self
        }
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<ModelParams, ValidationReport> {
        validate(*self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldIssue {
    pub field: &'static str,
    pub value: f64,
    pub message: &'static str,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}: {}", self.field, self.value, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub struct ValidationReport {
    pub issues: Vec<FieldIssue>,
}

impl ValidationReport {
    pub fn fields(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.issues.iter().map(|i| i.field)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid model parameters: ")?;
        for (k, issue) in self.issues.iter().enumerate() {
            if k > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

pub fn validate(params: ModelParams) -> Result<ModelParams, ValidationReport> {
    let mut issues = Vec::new();
    let rates = [
        ("g", params.g),
        ("gamma_c", params.gamma_c),
        ("gamma_deph", params.gamma_deph),
        ("gamma_nr", params.gamma_nr),
        ("gamma_nl", params.gamma_nl),
        ("pump", params.pump),
    ];
    for (field, value) in rates {
        if !value.is_finite() {
            issues.push(FieldIssue {
                field,
                value,
                message: "must be finite",
            });
        } else if value < 0.0 {
            issues.push(FieldIssue {
                field,
                value,
                message: "rates must be >= 0",
            });
        } else if field == "gamma_c" && value == 0.0 {
            issues.push(FieldIssue {
                field,
                value,
                message: "the cavity must decay (gamma_c > 0)",
            });
        }
    }
    if !params.detuning.is_finite() {
        issues.push(FieldIssue {
            field: "detuning",
            value: params.detuning,
            message: "must be finite",
        });
    }
    if issues.is_empty() {
        Ok(params)
    } else {
        Err(ValidationReport { issues })
    }
}
