//! Operators and states on truncated spin ⊗ Fock spaces.
//!
//! Composite spaces are ordered spin first, then mode x, then mode y, so
//! the flat index of |m, n_x, n_y⟩ is `(m·(N+1) + n_x)·(N+1) + n_y`.
//! [`CompositeBasis`] is the one place that knows this.

mod krylov;

pub use krylov::{LanczosPropagator, SparseOperator};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// Dense complex square matrix.
pub type Operator = DMatrix<C64>;
/// Dense complex column vector.
pub type StateVector = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn phase(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// One truncated bosonic mode with levels 0..=n_max.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FockSpace {
    pub n_max: usize,
}

impl FockSpace {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::Domain(format!("Fock truncation must be at least 1, got {n_max}")));
        }
        Ok(Self { n_max })
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }
}

/// Ladder operators of one mode.
#[derive(Clone, Debug)]
pub struct Ladder {
    pub annihilate: Operator,
    pub create: Operator,
    pub number: Operator,
}

pub fn fock_operators(n_max: usize) -> Result<Ladder> {
    let d = FockSpace::new(n_max)?.dim();
    let annihilate = Operator::from_fn(d, d, |r, col| {
        if col == r + 1 {
            c((col as f64).sqrt(), 0.0)
        } else {
            C64::default()
        }
    });
    let create = annihilate.adjoint();
    let number = Operator::from_diagonal(&DVector::from_fn(d, |n, _| c(n as f64, 0.0)));
    Ok(Ladder { annihilate, create, number })
}

pub fn identity(dim: usize) -> Operator {
    Operator::identity(dim, dim)
}

/// Kronecker product, left factor outermost.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

/// Kronecker product of state vectors.
pub fn tensor_state(u: &StateVector, v: &StateVector) -> StateVector {
    u.kronecker(v)
}

pub fn basis_state(dim: usize, index: usize) -> StateVector {
    let mut v = StateVector::zeros(dim);
    v[index] = c(1.0, 0.0);
    v
}

/// |i⟩⟨j| on a space of dimension `dim`.
pub fn outer(dim: usize, i: usize, j: usize) -> Operator {
    let mut m = Operator::zeros(dim, dim);
    m[(i, j)] = c(1.0, 0.0);
    m
}

/// Index bookkeeping for spin ⊗ mode₁ ⊗ … composites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompositeBasis {
    pub spin_dim: usize,
    pub mode_dims: Vec<usize>,
}

impl CompositeBasis {
    pub fn new(spin_dim: usize, modes: &[FockSpace]) -> Self {
        Self { spin_dim, mode_dims: modes.iter().map(FockSpace::dim).collect() }
    }

    pub fn mode_block(&self) -> usize {
        self.mode_dims.iter().product()
    }

    pub fn dim(&self) -> usize {
        self.spin_dim * self.mode_block()
    }

    pub fn index(&self, spin: usize, occupations: &[usize]) -> usize {
        debug_assert_eq!(occupations.len(), self.mode_dims.len());
        occupations
            .iter()
            .zip(&self.mode_dims)
            .fold(spin, |acc, (&n, &d)| {
                debug_assert!(n < d);
                acc * d + n
            })
    }

    /// Inverse of [`index`](Self::index): (spin, occupations).
    pub fn split(&self, mut index: usize) -> (usize, Vec<usize>) {
        let mut occ = vec![0; self.mode_dims.len()];
        for (slot, &d) in occ.iter_mut().zip(&self.mode_dims).rev() {
            *slot = index % d;
            index /= d;
        }
        (index, occ)
    }

    /// Lifts a spin operator to the composite space.
    pub fn spin_op(&self, s: &Operator) -> Operator {
        tensor(s, &identity(self.mode_block()))
    }

    /// Lifts a single-mode operator acting on mode `k`.
    pub fn mode_op(&self, k: usize, op: &Operator) -> Operator {
        let mut out = identity(self.spin_dim);
        for (j, &d) in self.mode_dims.iter().enumerate() {
            out = if j == k { tensor(&out, op) } else { tensor(&out, &identity(d)) };
        }
        out
    }

    /// |spin⟩ ⊗ |0…0⟩.
    pub fn ground(&self, spin: usize) -> StateVector {
        basis_state(self.dim(), self.index(spin, &vec![0; self.mode_dims.len()]))
    }

    /// Diagonal projector keeping states with every occupation below the
    /// top level of its mode.
    pub fn interior_mask(&self) -> Vec<bool> {
        (0..self.dim())
            .map(|i| self.split(i).1.iter().zip(&self.mode_dims).all(|(&n, &d)| n + 1 < d))
            .collect()
    }

    /// Spin populations with the modes traced out.
    pub fn spin_populations(&self, psi: &StateVector) -> Vec<f64> {
        let block = self.mode_block();
        (0..self.spin_dim)
            .map(|s| psi.rows(s * block, block).iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }
}

pub fn max_abs(m: &Operator) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// ‖A − A†‖_max
pub fn hermitian_defect(a: &Operator) -> f64 {
    max_abs(&(a - a.adjoint()))
}

/// ‖U†U − I‖_max
pub fn unitarity_defect(u: &Operator) -> f64 {
    max_abs(&(u.adjoint() * u - identity(u.nrows())))
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

pub fn expectation(op: &Operator, psi: &StateVector) -> C64 {
    psi.dotc(&(op * psi))
}

fn check_hermitian(h: &Operator) -> Result<()> {
    if !h.is_square() {
        return Err(Error::Contract(format!("operator is {}×{}, not square", h.nrows(), h.ncols())));
    }
    let defect = hermitian_defect(h);
    let scale = max_abs(h).max(1.0);
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::Contract(format!("generator is not Hermitian (defect {defect:e})")));
    }
    Ok(())
}

/// Eigendecomposition H = V diag(E) V† of a Hermitian operator, reused for
/// every propagation time.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    pub values: DVector<f64>,
    pub vectors: Operator,
}

impl HermitianSpectrum {
    pub fn new(h: &Operator) -> Result<Self> {
        check_hermitian(h)?;
        // symmetrize so roundoff in the input cannot leak into V
        let sym = (h + h.adjoint()).scale(0.5);
        let eig = sym.symmetric_eigen();
        Ok(Self { values: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// e^{−iHt}
    pub fn propagator(&self, t: f64) -> Operator {
        let mut vd = self.vectors.clone();
        for (k, mut col) in vd.column_iter_mut().enumerate() {
            col *= phase(-self.values[k] * t);
        }
        vd * self.vectors.adjoint()
    }

    /// Coordinates of ψ in the eigenbasis, for repeated [`evolve_coords`].
    pub fn coords(&self, psi: &StateVector) -> StateVector {
        self.vectors.ad_mul(psi)
    }

    pub fn evolve_coords(&self, coords: &StateVector, t: f64) -> StateVector {
        let rotated = StateVector::from_fn(coords.len(), |k, _| coords[k] * phase(-self.values[k] * t));
        &self.vectors * rotated
    }

    pub fn evolve(&self, psi: &StateVector, t: f64) -> StateVector {
        self.evolve_coords(&self.coords(psi), t)
    }
}

/// e^{−iHt} for Hermitian H (ħ = 1).
pub fn evolve_unitary(h: &Operator, t: f64) -> Result<Operator> {
    Ok(HermitianSpectrum::new(h)?.propagator(t))
}

/// Truncated coherent state e^{−|α|²/2} Σ αⁿ/√n! |n⟩, renormalized.
pub fn coherent_state(alpha: C64, space: FockSpace) -> StateVector {
    let n2 = alpha.norm_sqr();
    if n2 > space.n_max as f64 / 4.0 {
        log::warn!("coherent state |α|² = {n2:.3} is large for n_max = {}; truncation error likely", space.n_max);
    }
    let mut v = StateVector::zeros(space.dim());
    let mut term = c((-n2 / 2.0).exp(), 0.0);
    for n in 0..space.dim() {
        if n > 0 {
            term *= alpha / (n as f64).sqrt();
        }
        v[n] = term;
    }
    let norm = v.norm();
    v / c(norm, 0.0)
}

/// |⟨a|b⟩|² for normalized states.
pub fn fidelity(a: &StateVector, b: &StateVector) -> f64 {
    a.dotc(b).norm_sqr()
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_level_ladder() {
        let l = fock_operators(1).unwrap();
        assert_eq!(l.annihilate[(0, 1)], c(1.0, 0.0));
        assert_eq!(l.annihilate.iter().filter(|z| z.norm() > 0.0).count(), 1);
        assert!(fock_operators(0).is_err());
    }

    #[test]
    fn ladder_algebra() {
        let n_max = 6;
        let l = fock_operators(n_max).unwrap();
        assert!(max_abs(&(&l.create * &l.annihilate - &l.number)) < 1e-14);
        let comm = commutator(&l.annihilate, &l.create);
        for i in 0..=n_max {
            for j in 0..=n_max {
                let want = if i == j && i < n_max { 1.0 } else { 0.0 };
                if i == n_max && j == n_max {
                    // truncation puts −n_max here
                    assert!((comm[(i, j)] + n_max as f64).norm() < 1e-14);
                } else {
                    assert!((comm[(i, j)] - want).norm() < 1e-14, "({i},{j})");
                }
            }
        }
        for n in 1..=n_max {
            assert_eq!(l.annihilate[(n - 1, n)], c((n as f64).sqrt(), 0.0));
        }
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(tensor(&identity(3), &identity(2)), identity(6));
        let d = |a: f64, b: f64| Operator::from_diagonal(&DVector::from_vec(vec![c(a, 0.0), c(b, 0.0)]));
        let k = tensor(&d(1.0, 2.0), &d(3.0, 4.0));
        let want: Vec<C64> = [3.0, 4.0, 6.0, 8.0].iter().map(|&x| c(x, 0.0)).collect();
        assert_eq!(k, Operator::from_diagonal(&DVector::from_vec(want)));
    }

    #[test]
    fn kronecker_acts_factorwise() {
        let a = random_hermitian(3, 1) + Operator::from_fn(3, 3, |i, j| c(i as f64, j as f64));
        let b = random_hermitian(4, 2);
        let u = random_state(3, 3);
        let v = random_state(4, 4);
        let lhs = tensor(&a, &b) * tensor_state(&u, &v);
        let (au, bv) = (&a * &u, &b * &v);
        // explicit product oracle
        for i in 0..3 {
            for j in 0..4 {
                assert!((lhs[i * 4 + j] - au[i] * bv[j]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn composite_indexing() {
        let fs = FockSpace::new(3).unwrap();
        let basis = CompositeBasis::new(5, &[fs, fs]);
        assert_eq!(basis.dim(), 80);
        assert_eq!(basis.index(2, &[1, 3]), (2 * 4 + 1) * 4 + 3);
        for i in 0..basis.dim() {
            let (s, occ) = basis.split(i);
            assert_eq!(basis.index(s, &occ), i);
        }
        // mode_op agrees with index bookkeeping
        let a = fock_operators(3).unwrap().annihilate;
        let ay = basis.mode_op(1, &a);
        let from = basis.index(4, &[2, 3]);
        let to = basis.index(4, &[2, 2]);
        assert!((ay[(to, from)] - c(3f64.sqrt(), 0.0)).norm() < 1e-15);
        assert_eq!(basis.interior_mask().iter().filter(|&&b| b).count(), 5 * 9);
    }

    #[test]
    fn zero_time_is_identity() {
        let h = random_hermitian(6, 7);
        assert!(max_abs(&(evolve_unitary(&h, 0.0).unwrap() - identity(6))) < 1e-13);
    }

    #[test]
    fn diagonal_generator() {
        let (w1, w2, t) = (0.7, -2.3, 1.9);
        let h = Operator::from_diagonal(&DVector::from_vec(vec![c(w1, 0.0), c(w2, 0.0)]));
        let u = evolve_unitary(&h, t).unwrap();
        assert!((u[(0, 0)] - phase(-w1 * t)).norm() < 1e-14);
        assert!((u[(1, 1)] - phase(-w2 * t)).norm() < 1e-14);
        assert!(u[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn group_law() {
        let h = random_hermitian(8, 11);
        let (t1, t2) = (0.37, 1.21);
        let lhs = evolve_unitary(&h, t1).unwrap() * evolve_unitary(&h, t2).unwrap();
        let rhs = evolve_unitary(&h, t1 + t2).unwrap();
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut h = random_hermitian(4, 5);
        h[(0, 1)] += c(1e-6, 0.0);
        assert!(matches!(evolve_unitary(&h, 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn coherent_vacuum_and_mean() {
        let fs = FockSpace::new(30).unwrap();
        let vac = coherent_state(c(0.0, 0.0), fs);
        assert_eq!(vac, basis_state(31, 0));
        let psi = coherent_state(c(1.0, 0.0), fs);
        assert!((psi.norm() - 1.0).abs() < 1e-15);
        // Poisson mean: Σ n e^{-1}/n! over the truncated support
        let mut mean = 0.0;
        let mut weight = (-1f64).exp();
        for n in 0..=30 {
            if n > 0 {
                weight /= n as f64;
            }
            mean += n as f64 * weight;
        }
        let number = fock_operators(30).unwrap().number;
        let got = expectation(&number, &psi).re;
        assert!((got - mean).abs() < 1e-12);
        assert!((got - 1.0).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn propagation_is_unitary(seed in 0u64..1000, t in -50.0f64..50.0, dim in 2usize..12) {
            let h = random_hermitian(dim, seed) * c(10.0, 0.0);
            let u = evolve_unitary(&h, t).unwrap();
            prop_assert!(unitarity_defect(&u) <= 1e-12);
            let psi = random_state(dim, seed + 1);
            prop_assert!(((&u * psi).norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn commutator_defect_sits_on_top_level(n_max in 1usize..25) {
            let l = fock_operators(n_max).unwrap();
            let comm = commutator(&l.annihilate, &l.create);
            let interior = comm.view((0, 0), (n_max, n_max)).into_owned();
            prop_assert!(max_abs(&(interior - identity(n_max))) < 1e-14);
        }
    }
}
