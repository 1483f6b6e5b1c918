use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{build_hamiltonian, dagger, HilbertSpace, Operator};
use crate::model::ModelParams;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug)]
pub struct CollapseOperator {
    pub rate: f64,
    pub op: Operator,
}

/// Generator of the master equation, dρ/dt = L[ρ].
#[derive(Clone, Debug)]
pub struct Liouvillian {
    space: HilbertSpace,
    hamiltonian: Operator,
    collapse: Vec<CollapseOperator>,
    /// H − (i/2)·Σ r·L†L.
    h_eff: Operator,
}

/// Column-sparse view of an operator: `cols[k]` lists `(i, op[(i, k)])`.
struct Sparse {
    cols: Vec<Vec<(usize, C64)>>,
}

impl Sparse {
    fn of(op: &Operator) -> Self {
        let cols = (0..op.ncols())
            .map(|k| {
                (0..op.nrows())
                    .filter(|&i| op[(i, k)] != C64::new(0.0, 0.0))
                    .map(|i| (i, op[(i, k)]))
                    .collect()
            })
            .collect();
        Self { cols }
    }
}

impl Liouvillian {
    pub fn new(params: &ModelParams, space: HilbertSpace) -> Self {
        let c = space.c();
        let b = space.b();
        let a = space.a();
        let number = dagger(&c) * &c + dagger(&b) * &b;
        let candidates = [
            (2.0 * params.gamma_c, a),
            (params.pump, dagger(&c)),
            (params.pump, dagger(&b)),
            (params.gamma_nr, c.clone()),
            (params.gamma_nr, b.clone()),
            (params.gamma_nl, &c * &b),
            (0.5 * params.gamma_deph, number),
        ];
        let collapse: Vec<_> = candidates
            .into_iter()
            .filter(|(rate, _)| *rate > 0.0)
            .map(|(rate, op)| CollapseOperator { rate, op })
            .collect();
        let hamiltonian = build_hamiltonian(params, &space);
        let mut h_eff = hamiltonian.clone();
        for l in &collapse {
            h_eff -= (l.op.adjoint() * &l.op) * (I * (0.5 * l.rate));
        }
        Self {
            space,
            hamiltonian,
            collapse,
            h_eff,
        }
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn collapse_operators(&self) -> &[CollapseOperator] {
        &self.collapse
    }

    /// L[ρ] = −i(H_eff·ρ − ρ·H_eff†) + Σ r·L·ρ·L†.
    pub fn apply(&self, rho: &Operator) -> Operator {
        let mut out = (&self.h_eff * rho - rho * self.h_eff.adjoint()) * (-I);
        for l in &self.collapse {
            out += (&l.op * rho * l.op.adjoint()) * C64::new(l.rate, 0.0);
        }
        out
    }

    /// Coefficient of ρ_kl in (L[ρ])_ij.
    pub fn entry(&self, (i, j): (usize, usize), (k, l): (usize, usize)) -> C64 {
        let mut v = C64::new(0.0, 0.0);
        if j == l {
            v += -I * self.h_eff[(i, k)];
        }
        if i == k {
            v += I * self.h_eff[(j, l)].conj();
        }
        for op in &self.collapse {
            v += op.op[(i, k)] * op.op[(j, l)].conj() * op.rate;
        }
        v
    }

    /// Operator pairs (i, j) whose basis states carry equal conserved charges.
    /// The generator maps this block-diagonal subspace into itself and it
    /// contains the steady state.
    pub fn sector(&self) -> Vec<(usize, usize)> {
        let dim = self.space.dim();
        let mut pairs = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                if self.space.state(i).charges() == self.space.state(j).charges() {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Every pair (i, j), row-major.
    pub fn all_pairs(&self) -> Vec<(usize, usize)> {
        let dim = self.space.dim();
        (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).collect()
    }

    /// Nonzero generator entries (row, column, value) restricted to `pairs`,
    /// which must span an invariant subspace. Index `r` refers to `pairs[r]`;
    /// entries may repeat and are meant to be summed.
    pub fn restricted_entries(&self, pairs: &[(usize, usize)]) -> Vec<(usize, usize, C64)> {
        let dim = self.space.dim();
        let mut slot = vec![usize::MAX; dim * dim];
        for (r, &(i, j)) in pairs.iter().enumerate() {
            slot[i * dim + j] = r;
        }
        let h = Sparse::of(&self.h_eff);
        let jumps: Vec<_> = self.collapse.iter().map(|l| (l.rate, Sparse::of(&l.op))).collect();

        let mut out = Vec::new();
        let mut add = |i: usize, j: usize, col: usize, v: C64| {
            let row = slot[i * dim + j];
            assert!(row != usize::MAX, "pair set is not invariant");
            out.push((row, col, v));
        };
        for (col, &(k, l)) in pairs.iter().enumerate() {
            for &(i, hik) in &h.cols[k] {
                add(i, l, col, -I * hik);
            }
            for &(j, hjl) in &h.cols[l] {
                add(k, j, col, I * hjl.conj());
            }
            for (rate, op) in &jumps {
                for &(i, lik) in &op.cols[k] {
                    for &(j, ljl) in &op.cols[l] {
                        add(i, j, col, lik * ljl.conj() * *rate);
                    }
                }
            }
        }
        out
    }

    /// Dense form of [`Liouvillian::restricted_entries`].
    pub fn restricted_matrix(&self, pairs: &[(usize, usize)]) -> DMatrix<C64> {
        let m = pairs.len();
        let mut out = DMatrix::zeros(m, m);
        for (row, col, v) in self.restricted_entries(pairs) {
            out[(row, col)] += v;
        }
        out
    }

    /// Full dim² × dim² superoperator acting on row-major vec(ρ).
    pub fn superoperator(&self) -> DMatrix<C64> {
        self.restricted_matrix(&self.all_pairs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{BasisState, DensityMatrix};

    fn params(g: f64) -> ModelParams {
        ModelParams {
            detuning: 0.3,
            ..ModelParams::paperlike_defaults(g, 0.4, 0.7)
        }
    }

    fn random_operator(dim: usize, seed: u64) -> Operator {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        DMatrix::from_fn(dim, dim, |_, _| C64::new(next(), next()))
    }

    #[test]
    fn superoperator_matches_apply() {
        let space = HilbertSpace::new(2).unwrap();
        let l = Liouvillian::new(&params(0.3), space);
        let dim = space.dim();
        let rho = random_operator(dim, 7);
        let direct = l.apply(&rho);
        let s = l.superoperator();
        let vec = DMatrix::from_fn(dim * dim, 1, |r, _| rho[(r / dim, r % dim)]);
        let out = &s * vec;
        for i in 0..dim {
            for j in 0..dim {
                assert!((out[(i * dim + j, 0)] - direct[(i, j)]).norm() < 1e-13);
            }
        }
        assert!((s[(5, 17)] - l.entry((0, 5), (1, 17 - dim))).norm() < 1e-15);
    }

    #[test]
    fn generator_is_trace_free() {
        let space = HilbertSpace::new(4).unwrap();
        let l = Liouvillian::new(&params(0.5), space);
        let rho = random_operator(space.dim(), 3);
        assert!(l.apply(&rho).trace().norm() < 1e-13);
    }

    #[test]
    fn sector_is_invariant() {
        let space = HilbertSpace::new(3).unwrap();
        let l = Liouvillian::new(&params(0.5), space);
        let pairs = l.sector();
        assert_eq!(pairs.len(), 6 * (space.n_max() + 1) - 2);
        let m = l.restricted_matrix(&pairs);
        let full = l.superoperator();
        let dim = space.dim();
        for (r, &(i, j)) in pairs.iter().enumerate() {
            for (c, &(k, ll)) in pairs.iter().enumerate() {
                assert_eq!(m[(r, c)], full[(i * dim + j, k * dim + ll)]);
            }
        }
    }

    #[test]
    fn photon_decay_rate() {
        let space = HilbertSpace::new(3).unwrap();
        let p = ModelParams {
            pump: 0.0,
            gamma_nr: 0.0,
            gamma_nl: 0.0,
            ..params(0.0)
        };
        let l = Liouvillian::new(&p, space);
        let rho = DensityMatrix::pure(
            space,
            BasisState {
                electron: 0,
                hole: 0,
                photons: 2,
            },
        );
        let drho = DensityMatrix {
            space,
            elements: l.apply(&rho.elements),
        };
        assert!((drho.photon_number() + 2.0 * p.gamma_c * 2.0).abs() < 1e-14);
    }
}
