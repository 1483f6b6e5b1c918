//! Cluster-expansion equations of motion for one quantum-dot emitter in a cavity.
//!
//! The state holds the carrier and photon populations, the photon-assisted
//! polarization `p = ⟨b†c†a⟩` and the four doublet correlations required for the
//! two-photon expectation ⟨a†a†aa⟩.
//!
//! Two literal conventions are kept as written in the model equations:
//!
//! * the polarization rotates with `−iΔ` while `δ⟨b†c†a†aa⟩` rotates with `+iΔ`;
//! * the source term of `δ⟨b†c†a†aa⟩` is `−2g·p²` (the complex square, not `|p|²`).
//!
//! Both are inert at zero detuning with real initial amplitudes.

use nalgebra::SMatrix;
use num_complex::Complex64 as C64;

use crate::model::ModelParams;

/// Number of real degrees of freedom (two of the eight fields are complex).
pub const STATE_DIM: usize = 10;

pub type StateJacobian = SMatrix<f64, STATE_DIM, STATE_DIM>;

/// Flat index of each real component.
pub mod index {
    pub const N_E: usize = 0;
    pub const N_H: usize = 1;
    pub const N_P: usize = 2;
    pub const P_RE: usize = 3;
    pub const P_IM: usize = 4;
    pub const D_PHOTON2: usize = 5;
    pub const D_BC_AAA_RE: usize = 6;
    pub const D_BC_AAA_IM: usize = 7;
    pub const D_CE_PHOT: usize = 8;
    pub const D_H_PHOT: usize = 9;
}

pub const FIELD_NAMES: [&str; STATE_DIM] = [
    "n_e",
    "n_h",
    "n_p",
    "p_re",
    "p_im",
    "d_photon2",
    "d_bc_aaa_re",
    "d_bc_aaa_im",
    "d_ce_phot",
    "d_h_phot",
];

/// Dynamical variables. Values are unconstrained reals; the physical simplex
/// (0 ≤ n_e, n_h ≤ 1, n_p ≥ 0) is monitored by the solver, not enforced here.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DynamicState {
    pub n_e: f64,
    pub n_h: f64,
    pub n_p: f64,
    /// Photon-assisted polarization ⟨b†c†a⟩.
    pub p: C64,
    /// δ⟨a†a†aa⟩.
    pub d_photon2: f64,
    /// δ⟨b†c†a†aa⟩.
    pub d_bc_aaa: C64,
    /// δ⟨c†c a†a⟩.
    pub d_ce_phot: f64,
    /// δ⟨b†b a†a⟩.
    pub d_h_phot: f64,
}

impl DynamicState {
    pub fn vacuum() -> Self {
        Self::default()
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.n_e,
            self.n_h,
            self.n_p,
            self.p.re,
            self.p.im,
            self.d_photon2,
            self.d_bc_aaa.re,
            self.d_bc_aaa.im,
            self.d_ce_phot,
            self.d_h_phot,
        ]
    }

    /// Panics if `y` is shorter than [`STATE_DIM`].
    pub fn from_slice(y: &[f64]) -> Self {
        Self {
            n_e: y[0],
            n_h: y[1],
            n_p: y[2],
            p: C64::new(y[3], y[4]),
            d_photon2: y[5],
            d_bc_aaa: C64::new(y[6], y[7]),
            d_ce_phot: y[8],
            d_h_phot: y[9],
        }
    }

    /// Euclidean norm over the real components.
    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// ⟨a†a†aa⟩ = 2·n_p² + δ⟨a†a†aa⟩.
    pub fn two_photon(&self) -> f64 {
        two_photon_expectation(self)
    }
}

/// ⟨a†a†aa⟩ = 2·n_p² + δ⟨a†a†aa⟩.
pub fn two_photon_expectation(state: &DynamicState) -> f64 {
    2.0 * state.n_p * state.n_p + state.d_photon2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ToggleError;

impl std::fmt::Display for ToggleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("the inversion term requires the doublet correlations")
    }
}

impl std::error::Error for ToggleError {}

/// Which correlation terms enter the right-hand side.
///
/// `include_inversion_term` implies `include_doublets`; the constructor enforces it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CorrelationToggles {
    include_doublets: bool,
    include_inversion_term: bool,
}

impl CorrelationToggles {
    /// Every doublet correlation, including g(n_e + n_h − 1)·δ⟨a†a†aa⟩.
    pub const FULL: Self = Self {
        include_doublets: true,
        include_inversion_term: true,
    };
    /// Doublets without the inversion-weighted δ⟨a†a†aa⟩ feedback.
    pub const NO_INVERSION: Self = Self {
        include_doublets: true,
        include_inversion_term: false,
    };
    /// Factorized populations and polarization only.
    pub const UNCORRELATED: Self = Self {
        include_doublets: false,
        include_inversion_term: false,
    };

    pub fn new(include_doublets: bool, include_inversion_term: bool) -> Result<Self, ToggleError> {
        if include_inversion_term && !include_doublets {
            return Err(ToggleError);
        }
        Ok(Self {
            include_doublets,
            include_inversion_term,
        })
    }

    pub fn include_doublets(&self) -> bool {
        self.include_doublets
    }

    pub fn include_inversion_term(&self) -> bool {
        self.include_inversion_term
    }

    /// Short name used in configuration files and tables.
    pub fn label(&self) -> &'static str {
        match (self.include_doublets, self.include_inversion_term) {
            (true, true) => "full",
            (true, false) => "no-inversion",
            _ => "uncorrelated",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "full" => Some(Self::FULL),
            "no-inversion" => Some(Self::NO_INVERSION),
            "uncorrelated" => Some(Self::UNCORRELATED),
            _ => None,
        }
    }
}

impl Default for CorrelationToggles {
    fn default() -> Self {
        Self::FULL
    }
}

/// Time derivative of every field.
pub fn rhs(state: &DynamicState, params: &ModelParams, toggles: CorrelationToggles) -> DynamicState {
    let ModelParams {
        g,
        gamma_c,
        gamma_deph,
        gamma_nr,
        gamma_nl,
        pump,
        detuning,
    } = *params;
    let DynamicState {
        n_e,
        n_h,
        n_p,
        p,
        d_photon2,
        d_bc_aaa,
        d_ce_phot,
        d_h_phot,
    } = *state;

    let emission = 2.0 * g * p.re;
    let pair_loss = gamma_nl * n_e * n_h;
    let inversion = n_e + n_h - 1.0;

    let mut dp = -C64::new(gamma_deph + gamma_c, detuning) * p + g * n_e * n_h + g * inversion * n_p;
    if toggles.include_doublets {
        dp += g * (d_ce_phot + d_h_phot);
    }

    let mut out = DynamicState {
        n_e: -emission + pump * (1.0 - n_e) - gamma_nr * n_e - pair_loss,
        n_h: -emission + pump * (1.0 - n_h) - gamma_nr * n_h - pair_loss,
        n_p: emission - 2.0 * gamma_c * n_p,
        p: dp,
        ..DynamicState::default()
    };

    if toggles.include_doublets {
        out.d_photon2 = -4.0 * gamma_c * d_photon2 + 4.0 * g * d_bc_aaa.re;

        let mut db = C64::new(-(gamma_deph + 3.0 * gamma_c), detuning) * d_bc_aaa
            + 2.0 * g * (n_h + n_p) * d_ce_phot
            + 2.0 * g * (n_e + n_p) * d_h_phot
            - 2.0 * g * p * p;
        if toggles.include_inversion_term {
            db += g * inversion * d_photon2;
        }
        out.d_bc_aaa = db;

        let carrier_photon_decay = gamma_nr + 2.0 * gamma_c;
        out.d_ce_phot = -carrier_photon_decay * d_ce_phot - 2.0 * g * (p * (n_e + n_p) + d_bc_aaa).re;
        out.d_h_phot = -carrier_photon_decay * d_h_phot - 2.0 * g * (p * (n_h + n_p) + d_bc_aaa).re;
    }
    out
}

/// Analytic Jacobian ∂rhs/∂y over the flat real layout of [`index`].
pub fn jacobian(state: &DynamicState, params: &ModelParams, toggles: CorrelationToggles) -> StateJacobian {
    use index::*;
    let ModelParams {
        g,
        gamma_c,
        gamma_deph,
        gamma_nr,
        gamma_nl,
        pump,
        detuning,
    } = *params;
    let DynamicState {
        n_e,
        n_h,
        n_p,
        p,
        d_photon2,
        d_ce_phot,
        d_h_phot,
        ..
    } = *state;
    let mut j = StateJacobian::zeros();

    j[(N_E, N_E)] = -pump - gamma_nr - gamma_nl * n_h;
    j[(N_E, N_H)] = -gamma_nl * n_e;
    j[(N_E, P_RE)] = -2.0 * g;

    j[(N_H, N_E)] = -gamma_nl * n_h;
    j[(N_H, N_H)] = -pump - gamma_nr - gamma_nl * n_e;
    j[(N_H, P_RE)] = -2.0 * g;

    j[(N_P, N_P)] = -2.0 * gamma_c;
    j[(N_P, P_RE)] = 2.0 * g;

    let pol_decay = gamma_deph + gamma_c;
    j[(P_RE, N_E)] = g * (n_h + n_p);
    j[(P_RE, N_H)] = g * (n_e + n_p);
    j[(P_RE, N_P)] = g * (n_e + n_h - 1.0);
    j[(P_RE, P_RE)] = -pol_decay;
    j[(P_RE, P_IM)] = detuning;
    j[(P_IM, P_RE)] = -detuning;
    j[(P_IM, P_IM)] = -pol_decay;

    if !toggles.include_doublets {
        return j;
    }
    j[(P_RE, D_CE_PHOT)] = g;
    j[(P_RE, D_H_PHOT)] = g;

    j[(D_PHOTON2, D_PHOTON2)] = -4.0 * gamma_c;
    j[(D_PHOTON2, D_BC_AAA_RE)] = 4.0 * g;

    let b_decay = gamma_deph + 3.0 * gamma_c;
    let inv = if toggles.include_inversion_term { 1.0 } else { 0.0 };
    j[(D_BC_AAA_RE, N_E)] = inv * g * d_photon2 + 2.0 * g * d_h_phot;
    j[(D_BC_AAA_RE, N_H)] = inv * g * d_photon2 + 2.0 * g * d_ce_phot;
    j[(D_BC_AAA_RE, N_P)] = 2.0 * g * (d_ce_phot + d_h_phot);
    j[(D_BC_AAA_RE, P_RE)] = -4.0 * g * p.re;
    j[(D_BC_AAA_RE, P_IM)] = 4.0 * g * p.im;
    j[(D_BC_AAA_RE, D_PHOTON2)] = inv * g * (n_e + n_h - 1.0);
    j[(D_BC_AAA_RE, D_BC_AAA_RE)] = -b_decay;
    j[(D_BC_AAA_RE, D_BC_AAA_IM)] = -detuning;
    j[(D_BC_AAA_RE, D_CE_PHOT)] = 2.0 * g * (n_h + n_p);
    j[(D_BC_AAA_RE, D_H_PHOT)] = 2.0 * g * (n_e + n_p);

    j[(D_BC_AAA_IM, P_RE)] = -4.0 * g * p.im;
    j[(D_BC_AAA_IM, P_IM)] = -4.0 * g * p.re;
    j[(D_BC_AAA_IM, D_BC_AAA_RE)] = detuning;
    j[(D_BC_AAA_IM, D_BC_AAA_IM)] = -b_decay;

    let cp_decay = gamma_nr + 2.0 * gamma_c;
    j[(D_CE_PHOT, N_E)] = -2.0 * g * p.re;
    j[(D_CE_PHOT, N_P)] = -2.0 * g * p.re;
    j[(D_CE_PHOT, P_RE)] = -2.0 * g * (n_e + n_p);
    j[(D_CE_PHOT, D_BC_AAA_RE)] = -2.0 * g;
    j[(D_CE_PHOT, D_CE_PHOT)] = -cp_decay;

    j[(D_H_PHOT, N_H)] = -2.0 * g * p.re;
    j[(D_H_PHOT, N_P)] = -2.0 * g * p.re;
    j[(D_H_PHOT, P_RE)] = -2.0 * g * (n_h + n_p);
    j[(D_H_PHOT, D_BC_AAA_RE)] = -2.0 * g;
    j[(D_H_PHOT, D_H_PHOT)] = -cp_decay;
    j
}
