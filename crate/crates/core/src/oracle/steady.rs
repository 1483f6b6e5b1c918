use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{DensityMatrix, HilbertSpace, Liouvillian, OracleError};
use crate::model::ModelParams;
use crate::observables::{Observables, G2, PHOTON_FLOOR};
use crate::solver::{drive, DriveOptions, Flow, Method, OdeSystem, StepFailure};

pub const DEFAULT_N_MAX: usize = 8;
pub const N_MAX_CAP: usize = 64;
/// Largest population tolerated in the top Fock level.
pub const TRUNCATION_THRESHOLD: f64 = 1e-8;
/// Singular values below this fraction of the largest count as zero.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct OracleSteadyState {
    pub rho: DensityMatrix,
    pub observables: Observables,
    pub top_population: f64,
}

fn observables(rho: &DensityMatrix, params: &ModelParams) -> Observables {
    let photon_number = rho.photon_number();
    let two_photon = rho.two_photon();
    let g2_zero = if photon_number > PHOTON_FLOOR {
        G2::Value(two_photon / (photon_number * photon_number))
    } else {
        G2::Undefined
    };
    Observables {
        photon_number,
        two_photon,
        g2_zero,
        output_rate: 2.0 * params.gamma_c * photon_number,
    }
}

/// Unique steady state, solved in the charge-diagonal block of operator space.
pub fn oracle_steady_state(params: &ModelParams, space: HilbertSpace) -> Result<OracleSteadyState, OracleError> {
    params.validate()?;
    let liouvillian = Liouvillian::new(params, space);
    let pairs = liouvillian.sector();
    let m = liouvillian.restricted_matrix(&pairs);

    let singular = m.clone().singular_values();
    let largest = singular.iter().cloned().fold(0.0, f64::max);
    let nullity = singular.iter().filter(|&&s| s <= SINGULAR_TOLERANCE * largest).count();
    if nullity != 1 {
        return Err(OracleError::SingularSteadyState { nullity });
    }

    // The rows of m sum to zero over the diagonal pairs (trace preservation),
    // so one of them can be replaced by the normalisation Tr ρ = 1.
    let anchor = pairs.iter().position(|&(i, j)| i == j).expect("sector contains diagonal pairs");
    let mut system = m;
    for (col, &(k, l)) in pairs.iter().enumerate() {
        system[(anchor, col)] = if k == l { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
    }
    let mut rhs = DMatrix::zeros(pairs.len(), 1);
    rhs[(anchor, 0)] = C64::new(1.0, 0.0);

    let lu = system.clone().lu();
    let mut x = lu.solve(&rhs).ok_or(OracleError::SingularSteadyState { nullity: 2 })?;
    let residual = &rhs - &system * &x;
    if let Some(dx) = lu.solve(&residual) {
        x += dx;
    }

    let dim = space.dim();
    let mut elements = DMatrix::zeros(dim, dim);
    for (r, &(i, j)) in pairs.iter().enumerate() {
        elements[(i, j)] = x[(r, 0)];
    }
    let elements = (&elements + elements.adjoint()) * C64::new(0.5, 0.0);
    let rho = DensityMatrix { space, elements };

    let top_population = rho.photon_distribution()[space.n_max()];
    if top_population >= TRUNCATION_THRESHOLD {
        return Err(OracleError::TruncationTooSmall {
            n_max: space.n_max(),
            population: top_population,
        });
    }
    let observables = observables(&rho, params);
    Ok(OracleSteadyState {
        rho,
        observables,
        top_population,
    })
}

pub fn oracle_steady_observables(params: &ModelParams, space: HilbertSpace) -> Result<Observables, OracleError> {
    oracle_steady_state(params, space).map(|s| s.observables)
}

/// Starts at `n_max` and doubles the truncation on [`OracleError::TruncationTooSmall`]
/// up to [`N_MAX_CAP`]. Returns the accepted truncation with the result.
pub fn oracle_steady_observables_auto(
    params: &ModelParams,
    n_max: usize,
) -> Result<(OracleSteadyState, HilbertSpace), OracleError> {
    let mut n = n_max;
    loop {
        let space = HilbertSpace::new(n)?;
        match oracle_steady_state(params, space) {
            Err(OracleError::TruncationTooSmall { .. }) if n < N_MAX_CAP => n = (2 * n).min(N_MAX_CAP),
            other => return other.map(|s| (s, space)),
        }
    }
}

/// ρ flattened as [Re(row-major), Im(row-major)].
/// Row-major vec(ρ) split into real and imaginary halves.
struct MasterEquation {
    entries: Vec<(usize, usize, C64)>,
    dim: usize,
}

impl MasterEquation {
    fn unflatten(&self, y: &[f64]) -> DMatrix<C64> {
        let n = self.dim * self.dim;
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            let r = i * self.dim + j;
            C64::new(y[r], y[n + r])
        })
    }

    fn flatten(&self, rho: &DMatrix<C64>) -> Vec<f64> {
        let n = self.dim * self.dim;
        let mut y = vec![0.0; 2 * n];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let r = i * self.dim + j;
                y[r] = rho[(i, j)].re;
                y[n + r] = rho[(i, j)].im;
            }
        }
        y
    }
}

impl OdeSystem for MasterEquation {
    fn dim(&self) -> usize {
        2 * self.dim * self.dim
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.dim * self.dim;
        dy.fill(0.0);
        for &(row, col, v) in &self.entries {
            let z = v * C64::new(y[col], y[n + col]);
            dy[row] += z.re;
            dy[n + row] += z.im;
        }
    }
}

/// Evolves `rho0` and returns the state at each of `times` (ps, ascending,
/// measured from the initial state).
pub fn propagate(
    liouvillian: &Liouvillian,
    rho0: &DensityMatrix,
    times: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Vec<DensityMatrix>, OracleError> {
    let space = liouvillian.space();
    let system = MasterEquation {
        entries: liouvillian.restricted_entries(&liouvillian.all_pairs()),
        dim: space.dim(),
    };
    let opts = DriveOptions {
        method: Method::DormandPrince,
        rel_tol,
        abs_tol: vec![abs_tol; system.dim()],
        initial_step: 1e-4,
        max_step: f64::INFINITY,
    };
    let mut y = system.flatten(&rho0.elements);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target < t {
            return Err(OracleError::Propagation(format!("sample times must ascend, got {target} after {t}")));
        }
        if target > t {
            let outcome = drive(&system, &y, target - t, &opts, |_, _| Flow::Continue).map_err(|f| {
                OracleError::Propagation(match f {
                    StepFailure::Collapse { t: s, h, .. } => format!("step collapsed to {h:e} at t = {}", t + s),
                    StepFailure::NonFinite { t: s, .. } => format!("non-finite state at t = {}", t + s),
                })
            })?;
            y = outcome.y;
            t = target;
        }
        out.push(DensityMatrix {
            space,
            elements: system.unflatten(&y),
        });
    }
    Ok(out)
}
