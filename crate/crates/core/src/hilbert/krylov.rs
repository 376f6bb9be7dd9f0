//! Lanczos propagation for spaces too large for a dense eigensolver.
//!
//! One Krylov space built from ψ₀ serves every time up to `t_max`:
//! ψ(t) ≈ ‖ψ₀‖·V·e^{−iTt}·e₁ with T the real tridiagonal Lanczos matrix.
//! The space grows until the a posteriori bound
//! β_m·t_max·Σ_k |Q_mk·Q_1k| drops below the tolerance, where T = QΘQᵀ.

use nalgebra::{DMatrix, DVector};

use super::{c, phase, Operator, StateVector, C64};
use crate::error::{Error, Result};

/// Compressed-row Hermitian operator.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    pub fn from_dense(m: &Operator) -> Self {
        let dim = m.nrows();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..dim {
            for col in 0..dim {
                let z = m[(r, col)];
                if z != C64::default() {
                    cols.push(col);
                    vals.push(z);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn apply(&self, x: &StateVector) -> StateVector {
        StateVector::from_fn(self.dim, |r, _| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.vals[k] * x[self.cols[k]]).sum()
        })
    }
}

#[derive(Clone, Debug)]
pub struct LanczosPropagator {
    basis: DMatrix<C64>,
    ritz_values: DVector<f64>,
    ritz_vectors: DMatrix<f64>,
    norm: f64,
    error_bound: f64,
}

const CHECK_EVERY: usize = 20;

impl LanczosPropagator {
    pub fn build(h: &SparseOperator, psi0: &StateVector, t_max: f64, tol: f64) -> Result<Self> {
        if psi0.len() != h.dim() {
            return Err(Error::Contract(format!("state has dimension {}, operator {}", psi0.len(), h.dim())));
        }
        let norm = psi0.norm();
        if norm == 0.0 {
            return Err(Error::Contract("cannot propagate the zero vector".into()));
        }
        let scale = h.vals.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(1.0);

        let mut q: Vec<StateVector> = vec![psi0 / c(norm, 0.0)];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let k = q.len() - 1;
            let mut w = h.apply(&q[k]);
            let a = q[k].dotc(&w).re;
            w.axpy(c(-a, 0.0), &q[k], c(1.0, 0.0));
            if k > 0 {
                w.axpy(c(-beta[k - 1], 0.0), &q[k - 1], c(1.0, 0.0));
            }
            // full reorthogonalization, twice
            for _ in 0..2 {
                for qj in &q {
                    let overlap = qj.dotc(&w);
                    w.axpy(-overlap, qj, c(1.0, 0.0));
                }
            }
            alpha.push(a);
            let b = w.norm();
            let m = alpha.len();
            let breakdown = b <= 1e-13 * scale || m == h.dim();

            if breakdown || m % CHECK_EVERY == 0 {
                let (values, vectors) = tridiagonal_eigen(&alpha, &beta);
                let bound = if breakdown {
                    0.0
                } else {
                    b * t_max * (0..m).map(|j| (vectors[(m - 1, j)] * vectors[(0, j)]).abs()).sum::<f64>()
                };
                if bound <= tol {
                    let basis = DMatrix::from_columns(&q);
                    log::debug!("lanczos converged at m = {m} (dim {}), bound {bound:e}", h.dim());
                    return Ok(Self { basis, ritz_values: values, ritz_vectors: vectors, norm, error_bound: bound });
                }
            }
            beta.push(b);
            q.push(w / c(b, 0.0));
        }
    }

    /// Krylov dimension actually used.
    pub fn krylov_dim(&self) -> usize {
        self.ritz_values.len()
    }

    pub fn error_bound(&self) -> f64 {
        self.error_bound
    }

    pub fn state(&self, t: f64) -> StateVector {
        let m = self.krylov_dim();
        let y = DVector::from_fn(m, |j, _| phase(-self.ritz_values[j] * t) * self.ritz_vectors[(0, j)]);
        let z = DVector::from_fn(m, |i, _| (0..m).map(|j| y[j] * self.ritz_vectors[(i, j)]).sum::<C64>());
        (&self.basis * z) * c(self.norm, 0.0)
    }
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::*;
    use super::*;

    #[test]
    fn sparse_matches_dense() {
        let mut h = random_hermitian(9, 3);
        h[(0, 5)] = C64::default();
        h[(5, 0)] = C64::default();
        let s = SparseOperator::from_dense(&h);
        assert_eq!(s.nnz(), 79);
        let v = random_state(9, 4);
        assert!((s.apply(&v) - &h * &v).norm() < 1e-14);
    }

    #[test]
    fn exhausting_the_space_is_exact() {
        let h = random_hermitian(12, 8) * c(3.0, 0.0);
        let psi = random_state(12, 9);
        let lz = LanczosPropagator::build(&SparseOperator::from_dense(&h), &psi, 5.0, 1e-12).unwrap();
        let spec = HermitianSpectrum::new(&h).unwrap();
        for &t in &[0.0, 0.3, 2.0, 5.0] {
            assert!((lz.state(t) - spec.evolve(&psi, t)).norm() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn oscillator_chain_converges_early() {
        // displaced oscillator: only a few levels are ever populated
        let n_max = 60;
        let l = fock_operators(n_max).unwrap();
        let h = &l.number * c(2.0, 0.0) + (&l.annihilate + &l.create) * c(0.3, 0.0);
        let psi = basis_state(n_max + 1, 0);
        let lz = LanczosPropagator::build(&SparseOperator::from_dense(&h), &psi, 10.0, 1e-11).unwrap();
        assert!(lz.krylov_dim() < n_max + 1);
        let spec = HermitianSpectrum::new(&h).unwrap();
        for &t in &[0.5, 3.3, 10.0] {
            assert!((lz.state(t) - spec.evolve(&psi, t)).norm() < 1e-10);
        }
    }
}
