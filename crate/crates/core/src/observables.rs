//! Figures of merit of a (steady) state.

use std::fmt;

use thiserror::Error;

use crate::dynamics::{two_photon_expectation, DynamicState};
use crate::model::ModelParams;

/// Photon numbers at or below this are treated as vacuum, where g²(0) is 0/0.
pub const PHOTON_FLOOR: f64 = 1e-15;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("g2(0) is undefined for photon number {photon_number:e} <= {PHOTON_FLOOR:e}")]
pub struct VacuumUndefined {
    pub photon_number: f64,
}

/// g²(0), or an explicit marker when the photon number is below [`PHOTON_FLOOR`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum G2 {
    Value(f64),
    Undefined,
}

impl G2 {
    pub fn value(&self) -> Option<f64> {
        match self {
            G2::Value(v) => Some(*v),
            G2::Undefined => None,
        }
    }
}

impl fmt::Display for G2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            G2::Value(v) => write!(f, "{v}"),
            G2::Undefined => f.write_str("undefined"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observables {
    /// ⟨a†a⟩.
    pub photon_number: f64,
    /// ⟨a†a†aa⟩, reported as computed even when negative.
    pub two_photon: f64,
    pub g2_zero: G2,
    /// Photon flux out of the cavity 2γ_c·⟨a†a⟩, ps⁻¹.
    pub output_rate: f64,
}

impl Observables {
    /// Set when a population or ⟨a†a†aa⟩ came out negative, a sign that the
    /// truncated cluster expansion has left its range of validity.
    pub fn negative_moment(&self) -> bool {
        self.photon_number < 0.0 || self.two_photon < 0.0
    }
}

/// ⟨a†a†aa⟩ / ⟨a†a⟩².
pub fn g2_zero(state: &DynamicState) -> Result<f64, VacuumUndefined> {
    if state.n_p <= PHOTON_FLOOR {
        return Err(VacuumUndefined {
            photon_number: state.n_p,
        });
    }
    Ok(two_photon_expectation(state) / (state.n_p * state.n_p))
}

/// 2γ_c·n_p.
pub fn output_rate(state: &DynamicState, params: &ModelParams) -> f64 {
    2.0 * params.gamma_c * state.n_p
}

pub fn observables_of(state: &DynamicState, params: &ModelParams) -> Observables {
    Observables {
        photon_number: state.n_p,
        two_photon: two_photon_expectation(state),
        g2_zero: g2_zero(state).map_or(G2::Undefined, G2::Value),
        output_rate: output_rate(state, params),
    }
}
