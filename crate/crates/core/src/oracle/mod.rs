//! Exact open-system reference model.
//!
//! One electron level, one hole level and a photon mode truncated at `n_max`
//! photons, evolved by a Lindblad master equation whose Hamiltonian (in a frame
//! rotating at the photon frequency) is
//!
//! ```text
//! H = Δ/2 · (c†c + b†b) − i·g·(b†c†a − a†cb)
//! ```
//!
//! and whose dissipators mirror the rates of the cluster-expansion model:
//!
//! | channel               | collapse operator | rate   |
//! |-----------------------|-------------------|--------|
//! | cavity loss           | a                 | 2γ_c   |
//! | pump                  | c†, b†            | P      |
//! | nonradiative loss     | c, b              | γ_nr   |
//! | background emission   | c·b               | γ_nl   |
//! | dephasing             | c†c + b†b         | γ/2    |
//!
//! The dephasing rate γ/2 makes the |eh⟩⟨00| coherence decay at γ. The joint
//! `c·b` collapse reproduces the `−γ_nl·n_e·n_h` loss only at the mean-field
//! level: it correlates the carriers, so the reference and the cluster expansion
//! agree exactly only for `g = 0` and `γ_nl = 0`.

mod liouvillian;
mod steady;

pub use liouvillian::{CollapseOperator, Liouvillian};
pub use steady::{
    oracle_steady_observables, oracle_steady_observables_auto, oracle_steady_state, propagate, OracleSteadyState,
    DEFAULT_N_MAX, N_MAX_CAP, SINGULAR_TOLERANCE, TRUNCATION_THRESHOLD,
};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::model::{ModelParams, ValidationReport};

pub type Operator = DMatrix<C64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    InvalidParams(#[from] ValidationReport),
    #[error("photon truncation must be at least 1, got {0}")]
    InvalidTruncation(usize),
    #[error("top Fock level n = {n_max} holds population {population:e}; increase the truncation")]
    TruncationTooSmall { n_max: usize, population: f64 },
    #[error("steady state is not unique: null space of dimension {nullity}")]
    SingularSteadyState { nullity: usize },
    #[error("propagation failed: {0}")]
    Propagation(String),
}

/// Electron ⊗ hole ⊗ Fock(0..=n_max).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HilbertSpace {
    n_max: usize,
}

/// Occupations of one basis state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasisState {
    pub electron: usize,
    pub hole: usize,
    pub photons: usize,
}

impl BasisState {
    /// Charges conserved by the Hamiltonian: 2·photons + electron + hole and
    /// electron − hole.
    pub fn charges(&self) -> (usize, isize) {
        (
            2 * self.photons + self.electron + self.hole,
            self.electron as isize - self.hole as isize,
        )
    }
}

impl HilbertSpace {
    pub fn new(n_max: usize) -> Result<Self, OracleError> {
        if n_max < 1 {
            return Err(OracleError::InvalidTruncation(n_max));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        4 * (self.n_max + 1)
    }

    pub fn index(&self, s: BasisState) -> usize {
        (s.electron * 2 + s.hole) * (self.n_max + 1) + s.photons
    }

    pub fn state(&self, index: usize) -> BasisState {
        let fock = self.n_max + 1;
        let carriers = index / fock;
        BasisState {
            electron: carriers / 2,
            hole: carriers % 2,
            photons: index % fock,
        }
    }

    /// Electron annihilator.
    pub fn c(&self) -> Operator {
        kron3(&lowering2(), &identity(2), &identity(self.n_max + 1))
    }

    /// Hole annihilator, with the Jordan–Wigner string over the electron mode so
    /// that {c, b} = 0.
    pub fn b(&self) -> Operator {
        kron3(&parity2(), &lowering2(), &identity(self.n_max + 1))
    }

    /// Photon annihilator.
    pub fn a(&self) -> Operator {
        let fock = self.n_max + 1;
        let mut a = DMatrix::zeros(fock, fock);
        for n in 1..fock {
            a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        kron3(&identity(2), &identity(2), &a)
    }

    pub fn identity(&self) -> Operator {
        identity(self.dim())
    }

    /// Projector-weighted diagonal operator built from the occupations.
    pub fn diagonal(&self, f: impl Fn(BasisState) -> f64) -> Operator {
        let dim = self.dim();
        DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                C64::new(f(self.state(i)), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

fn identity(n: usize) -> Operator {
    DMatrix::identity(n, n)
}

/// σ⁻ in the (|0⟩, |1⟩) basis.
fn lowering2() -> Operator {
    let mut m = DMatrix::zeros(2, 2);
    m[(0, 1)] = C64::new(1.0, 0.0);
    m
}

fn parity2() -> Operator {
    let mut m = DMatrix::zeros(2, 2);
    m[(0, 0)] = C64::new(1.0, 0.0);
    m[(1, 1)] = C64::new(-1.0, 0.0);
    m
}

fn kron3(x: &Operator, y: &Operator, z: &Operator) -> Operator {
    x.kronecker(y).kronecker(z)
}

pub fn dagger(op: &Operator) -> Operator {
    op.adjoint()
}

/// Rotating-frame Hamiltonian in units of ħ (rad/ps).
pub fn build_hamiltonian(params: &ModelParams, space: &HilbertSpace) -> Operator {
    let c = space.c();
    let b = space.b();
    let a = space.a();
    let cd = dagger(&c);
    let bd = dagger(&b);
    let ad = dagger(&a);
    let number = &cd * &c + &bd * &b;
    let absorb = &bd * &cd * &a;
    let emit = &ad * &c * &b;
    number * C64::new(0.5 * params.detuning, 0.0) + (absorb - emit) * C64::new(0.0, -params.g)
}

/// A density matrix on a [`HilbertSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub space: HilbertSpace,
    pub elements: Operator,
}

impl DensityMatrix {
    pub fn pure(space: HilbertSpace, state: BasisState) -> Self {
        let dim = space.dim();
        let mut elements = DMatrix::zeros(dim, dim);
        let k = space.index(state);
        elements[(k, k)] = C64::new(1.0, 0.0);
        Self { space, elements }
    }

    pub fn trace(&self) -> C64 {
        self.elements.trace()
    }

    pub fn expectation(&self, op: &Operator) -> C64 {
        (&self.elements * op).trace()
    }

    /// Largest |ρ − ρ†| entry.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.elements - self.elements.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.elements + self.elements.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().cloned().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Photon-number distribution P(n), summed over carrier states.
    pub fn photon_distribution(&self) -> Vec<f64> {
        let mut dist = vec![0.0; self.space.n_max() + 1];
        for k in 0..self.space.dim() {
            dist[self.space.state(k).photons] += self.elements[(k, k)].re;
        }
        dist
    }

    pub fn electron_population(&self) -> f64 {
        (0..self.space.dim())
            .filter(|&k| self.space.state(k).electron == 1)
            .map(|k| self.elements[(k, k)].re)
            .sum()
    }

    pub fn hole_population(&self) -> f64 {
        (0..self.space.dim())
            .filter(|&k| self.space.state(k).hole == 1)
            .map(|k| self.elements[(k, k)].re)
            .sum()
    }

    pub fn photon_number(&self) -> f64 {
        self.photon_distribution()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// ⟨a†a†aa⟩ = Σ n(n − 1)·P(n).
    pub fn two_photon(&self) -> f64 {
        self.photon_distribution()
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64) * (n as f64 - 1.0) * p)
            .sum()
    }

    /// Photon-assisted polarization ⟨b†c†a⟩.
    pub fn polarization(&self) -> C64 {
        let s = self.space;
        let op = dagger(&s.b()) * dagger(&s.c()) * s.a();
        self.expectation(&op)
    }
}
