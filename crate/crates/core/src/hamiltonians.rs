//! Interaction Hamiltonians, elimination generators and effective models.
//!
//! Spin levels are indexed in ascending m: (−1, 0, 1) for the Λ system and
//! (−2, −1, 0, 1, 2) for the four-pod. Couplings are stored by role:
//! `h_couple` is the sideband (spin-phonon) part, `h_force` the drive on
//! the motion. The force enters through its rate f = F·z₀/2 per mode, with
//! β = f/ω.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    c, evolve_unitary, fock_operators, identity, max_abs, phase, tensor, CompositeBasis, FockSpace, Operator,
    C64,
};
use crate::params::InternalParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemModel {
    Lambda3,
    FourPod5,
}

impl SystemModel {
    pub fn spin_dim(self) -> usize {
        match self {
            SystemModel::Lambda3 => 3,
            SystemModel::FourPod5 => 5,
        }
    }

    pub fn mode_count(self) -> usize {
        match self {
            SystemModel::Lambda3 => 1,
            SystemModel::FourPod5 => 2,
        }
    }

    /// Magnetic quantum numbers in index order.
    pub fn labels(self) -> &'static [i32] {
        match self {
            SystemModel::Lambda3 => &[-1, 0, 1],
            SystemModel::FourPod5 => &[-2, -1, 0, 1, 2],
        }
    }

    pub fn index_of(self, m: i32) -> usize {
        self.labels().iter().position(|&l| l == m).unwrap_or_else(|| panic!("no level m = {m} in {self:?}"))
    }

    /// How many excited levels share the vacuum shift of |0⟩: the
    /// compensating spin detuning is −multiplicity·g²/ω.
    pub fn stark_multiplicity(self) -> usize {
        self.mode_count()
    }

    /// Ratio of the readout pulse angle to Ω·t.
    pub fn angle_factor(self) -> f64 {
        match self {
            SystemModel::Lambda3 => SQRT_2,
            SystemModel::FourPod5 => 2.0,
        }
    }

    pub fn basis(self, n_max: usize) -> Result<CompositeBasis> {
        let fs = FockSpace::new(n_max)?;
        Ok(CompositeBasis::new(self.spin_dim(), &vec![fs; self.mode_count()]))
    }
}

/// |m⟩⟨m'| on the bare spin space.
pub fn spin_outer(model: SystemModel, m: i32, m_prime: i32) -> Operator {
    let d = model.spin_dim();
    let mut out = Operator::zeros(d, d);
    out[(model.index_of(m), model.index_of(m_prime))] = c(1.0, 0.0);
    out
}

fn spin_sum(model: SystemModel, terms: &[(f64, i32, i32)]) -> Operator {
    terms.iter().fold(Operator::zeros(model.spin_dim(), model.spin_dim()), |acc, &(w, m, mp)| {
        acc + spin_outer(model, m, mp) * c(w, 0.0)
    })
}

/// spin ⊗ mode_x ⊗ mode_y with identities where `None`.
fn lift(basis: &CompositeBasis, spin: &Operator, modes: &[Option<&Operator>]) -> Operator {
    let mut out = spin.clone();
    for (op, &d) in modes.iter().zip(&basis.mode_dims) {
        out = match op {
            Some(m) => tensor(&out, m),
            None => tensor(&out, &identity(d)),
        };
    }
    out
}

#[derive(Clone, Debug)]
pub struct HamiltonianSet {
    pub model: SystemModel,
    pub basis: CompositeBasis,
    /// ω·(phonon number) plus the spin detuning terms.
    pub h0: Operator,
    /// Spin-phonon sideband couplings.
    pub h_couple: Operator,
    /// Classical drive on the motion.
    pub h_force: Operator,
    pub h_total: Operator,
    /// ω·(phonon number) alone, the reference for the elimination.
    pub h_phonon: Operator,
    /// Anti-Hermitian elimination generator, split as (coupling, force)
    /// parts. `None` when ω = 0.
    pub generator: Option<(Operator, Operator)>,
}

impl HamiltonianSet {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Full generator S.
    pub fn generator_total(&self) -> Option<Operator> {
        self.generator.as_ref().map(|(sc, sf)| sc + sf)
    }

    /// ½[H_couple, S_couple], shifted by a multiple of the identity so
    /// that the |−1⟩ ⊗ vacuum entry vanishes. This is the phonon-number
    /// dependent level shift dropped by the effective models.
    pub fn residual_hamiltonian(&self) -> Option<Operator> {
        let (sc, _) = self.generator.as_ref()?;
        let half = (&self.h_couple * sc - sc * &self.h_couple) * c(0.5, 0.0);
        let anchor = self.basis.index(self.model.index_of(-1), &vec![0; self.model.mode_count()]);
        let shift = half[(anchor, anchor)];
        Some(half - identity(self.dim()) * shift)
    }
}

fn check_model(ip: &InternalParams, want: SystemModel) -> Result<()> {
    if ip.model != want {
        return Err(Error::Contract(format!("parameters describe {:?}, builder expects {want:?}", ip.model)));
    }
    Ok(())
}

/// Λ system: H0 = ω n̂ + Δ|1⟩⟨1|, sidebands g(a†|1⟩⟨0| + a|−1⟩⟨0| + h.c.),
/// drive f(a†e^{iξ} + a e^{−iξ}).
pub fn build_lambda(ip: &InternalParams, space: FockSpace) -> Result<HamiltonianSet> {
    check_model(ip, SystemModel::Lambda3)?;
    let model = SystemModel::Lambda3;
    let basis = CompositeBasis::new(3, &[space]);
    let l = fock_operators(space.n_max)?;
    let (g, omega, xi, f) = (ip.coupling, ip.omega, ip.phase, ip.force_rate[0]);

    let h_phonon = lift(&basis, &identity(3), &[Some(&(&l.number * c(omega, 0.0)))]);
    let h0 = &h_phonon + lift(&basis, &spin_outer(model, 1, 1), &[None]) * c(ip.spin_detuning, 0.0);

    // lowering part a·(|−1⟩⟨0| + |0⟩⟨1|)
    let x = spin_sum(model, &[(1.0, -1, 0), (1.0, 0, 1)]);
    let lower = lift(&basis, &x, &[Some(&l.annihilate)]);
    let h_couple = (&lower + lower.adjoint()) * c(g, 0.0);

    let drive = lift(&basis, &identity(3), &[Some(&(&l.annihilate * phase(-xi)))]);
    let h_force = (&drive + drive.adjoint()) * c(f, 0.0);

    let generator = (omega != 0.0).then(|| {
        let sc = (&lower - lower.adjoint()) * c(g / omega, 0.0);
        let sf = (&drive - drive.adjoint()) * c(f / omega, 0.0);
        (sc, sf)
    });

    let h_total = &h0 + &h_couple + &h_force;
    Ok(HamiltonianSet { model, basis, h0, h_couple, h_force, h_total, h_phonon, generator })
}

/// Four-pod system on spin ⊗ mode_x ⊗ mode_y.
///
/// The x mode drives |∓1⟩, |∓2⟩ ↔ |0⟩ with equal signs, the y mode with
/// relative sign −1 and a factor i: H_y = ig(A† − A) with
/// A = a_y(|−1⟩ − |−2⟩)⟨0| + a_y|0⟩(⟨1| − ⟨2|).
pub fn build_fourpod(ip: &InternalParams, space_x: FockSpace, space_y: FockSpace) -> Result<HamiltonianSet> {
    check_model(ip, SystemModel::FourPod5)?;
    let model = SystemModel::FourPod5;
    let basis = CompositeBasis::new(5, &[space_x, space_y]);
    let lx = fock_operators(space_x.n_max)?;
    let ly = fock_operators(space_y.n_max)?;
    let (g, omega, xi, delta) = (ip.coupling, ip.omega, ip.phase, ip.spin_detuning);
    let [fx, fy] = ip.force_rate;

    let h_phonon = lift(&basis, &identity(5), &[Some(&(&lx.number * c(omega, 0.0))), None])
        + lift(&basis, &identity(5), &[None, Some(&(&ly.number * c(omega, 0.0)))]);
    let spin_shift = spin_sum(model, &[(delta, 2, 2), (delta, 1, 1), (-delta, 0, 0)]);
    let h0 = &h_phonon + lift(&basis, &spin_shift, &[None, None]);

    let bx_spin = spin_sum(model, &[(1.0, -1, 0), (1.0, -2, 0), (1.0, 0, 1), (1.0, 0, 2)]);
    let ay_spin = spin_sum(model, &[(1.0, -1, 0), (-1.0, -2, 0), (1.0, 0, 1), (-1.0, 0, 2)]);
    let bx = lift(&basis, &bx_spin, &[Some(&lx.annihilate), None]);
    let ay = lift(&basis, &ay_spin, &[None, Some(&ly.annihilate)]);
    let h_x = (&bx + bx.adjoint()) * c(g, 0.0);
    let h_y = (ay.adjoint() - &ay) * c(0.0, g);
    let h_couple = h_x + h_y;

    let dx = lift(&basis, &identity(5), &[Some(&(&lx.annihilate * phase(-xi))), None]);
    let dy = lift(&basis, &identity(5), &[None, Some(&(&ly.annihilate * phase(-xi)))]);
    let h_force = (&dx + dx.adjoint()) * c(fx, 0.0) + (&dy + dy.adjoint()) * c(fy, 0.0);

    let generator = (omega != 0.0).then(|| {
        let sx = (&bx - bx.adjoint()) * c(g / omega, 0.0);
        let sy = (&ay + ay.adjoint()) * c(0.0, -g / omega);
        let sf = (&dx - dx.adjoint()) * c(fx / omega, 0.0) + (&dy - dy.adjoint()) * c(fy / omega, 0.0);
        (sx + sy, sf)
    });

    let h_total = &h0 + &h_couple + &h_force;
    Ok(HamiltonianSet { model, basis, h0, h_couple, h_force, h_total, h_phonon, generator })
}

/// Builds the model named by `ip` with `n_max` levels per mode.
pub fn build(ip: &InternalParams, n_max: usize) -> Result<HamiltonianSet> {
    let fs = FockSpace::new(n_max)?;
    match ip.model {
        SystemModel::Lambda3 => build_lambda(ip, fs),
        SystemModel::FourPod5 => build_fourpod(ip, fs, fs),
    }
}

/// Elimination condition ‖H_sb + [ω n̂, S]‖_max, as (interior, full): the
/// interior value restricts rows and columns to states below the top Fock
/// level of every mode. Returns `None` when there is no generator.
pub fn generator_residual(set: &HamiltonianSet) -> Option<(f64, f64)> {
    let s = set.generator_total()?;
    let h_sb = &set.h_couple + &set.h_force;
    let d = set.h_phonon.diagonal();
    let n = set.dim();
    // h_phonon is diagonal, so the commutator is elementwise
    let resid = Operator::from_fn(n, n, |i, j| h_sb[(i, j)] + (d[i] - d[j]) * s[(i, j)]);
    let mask = set.basis.interior_mask();
    let interior = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| mask[i] && mask[j])
        .fold(0.0f64, |acc, (i, j)| acc.max(resid[(i, j)].norm()));
    Some((interior, max_abs(&resid)))
}

/// Effective Λ model in the (−1, 0, 1) basis:
/// δ|1⟩⟨1| − Ω(e^{iθ}|−1⟩⟨0| + e^{−iθ}|1⟩⟨0| + h.c.) with Ω ≥ 0,
/// θ = ξ + (force direction) and δ the detuning left after compensation.
pub fn effective_lambda(ip: &InternalParams) -> Operator {
    let theta = ip.phase + ip.direction();
    effective_lambda_raw(ip.rabi(), theta, ip.residual_detuning())
}

pub fn effective_lambda_raw(rabi: f64, theta: f64, residual: f64) -> Operator {
    let m = SystemModel::Lambda3;
    let mut h = spin_outer(m, 1, 1) * c(residual, 0.0);
    let up = spin_outer(m, -1, 0) * phase(theta) + spin_outer(m, 1, 0) * phase(-theta);
    h -= (&up + up.adjoint()) * c(rabi, 0.0);
    h
}

/// Effective four-pod model in the (−2, −1, 0, 1, 2) basis:
/// −Ω(e^{iφ₊}|−2⟩ + e^{iφ₋}|−1⟩ + e^{−iφ₋}|1⟩ + e^{−iφ₊}|2⟩)⟨0| + h.c.,
/// φ± = ξ ± φ, plus δ(|1⟩⟨1| + |2⟩⟨2| − |0⟩⟨0|).
pub fn effective_fourpod(ip: &InternalParams) -> Operator {
    effective_fourpod_raw(ip.rabi(), ip.phase, ip.direction(), ip.residual_detuning())
}

pub fn effective_fourpod_raw(rabi: f64, xi: f64, direction: f64, residual: f64) -> Operator {
    let m = SystemModel::FourPod5;
    let (pp, pm) = (xi + direction, xi - direction);
    let mut h = spin_sum(m, &[(residual, 1, 1), (residual, 2, 2), (-residual, 0, 0)]);
    let up = spin_outer(m, -2, 0) * phase(pp)
        + spin_outer(m, -1, 0) * phase(pm)
        + spin_outer(m, 1, 0) * phase(-pm)
        + spin_outer(m, 2, 0) * phase(-pp);
    h -= (&up + up.adjoint()) * c(rabi, 0.0);
    h
}

/// D = exp(F(a†e^{iξ} − a e^{−iξ})).
pub fn displacement_unitary(amount: f64, xi: f64, space: FockSpace) -> Result<Operator> {
    if amount * amount > space.n_max as f64 / 4.0 {
        log::warn!("displacement {amount} is large for n_max = {}; truncation error likely", space.n_max);
    }
    let l = fock_operators(space.n_max)?;
    let up = &l.create * phase(xi);
    let anti = (&up - up.adjoint()) * c(amount, 0.0);
    // exp(G) = exp(−i·(iG)) with iG Hermitian
    evolve_unitary(&(anti * C64::i()), 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{
        basis_state, coherent_state, expectation, fidelity, hermitian_defect, tensor_state, HermitianSpectrum,
    };
    use crate::params::parse_config;
    use std::f64::consts::PI;

    fn fig2() -> InternalParams {
        parse_config(include_str!("../configs/fig2.json")).unwrap().internal().unwrap()
    }

    fn fig4() -> InternalParams {
        parse_config(include_str!("../configs/fig4.json")).unwrap().internal().unwrap()
    }

    fn quiet(mut ip: InternalParams) -> InternalParams {
        ip.coupling = 0.0;
        ip.force_rate = [0.0, 0.0];
        ip
    }

    fn is_diagonal(h: &Operator) -> bool {
        h.iter().enumerate().all(|(k, z)| k % h.nrows() == k / h.nrows() || *z == C64::default())
    }

    #[test]
    fn lambda_decoupled_is_diagonal() {
        let ip = quiet(fig2());
        let set = build_lambda(&ip, FockSpace::new(4).unwrap()).unwrap();
        assert!(is_diagonal(&set.h_total));
        for i in 0..set.dim() {
            let (s, occ) = set.basis.split(i);
            let want = ip.omega * occ[0] as f64 + if s == 2 { ip.spin_detuning } else { 0.0 };
            assert!((set.h_total[(i, i)].re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_sideband_entries() {
        let ip = fig2();
        let set = build_lambda(&ip, FockSpace::new(6).unwrap()).unwrap();
        let b = &set.basis;
        for n in 0..6 {
            let want = ip.coupling * ((n + 1) as f64).sqrt();
            // blue sideband |0, n⟩ → |1, n+1⟩
            assert!((set.h_couple[(b.index(2, &[n + 1]), b.index(1, &[n]))].re - want).abs() < 1e-12);
            // red sideband |0, n+1⟩ → |−1, n⟩
            assert!((set.h_couple[(b.index(0, &[n]), b.index(1, &[n + 1]))].re - want).abs() < 1e-12);
        }
        assert!(hermitian_defect(&set.h_total) <= 1e-12);
        assert!(hermitian_defect(&set.h_total) == 0.0);
    }

    #[test]
    fn fourpod_decoupled_is_diagonal() {
        let set = build(&quiet(fig4()), 3).unwrap();
        assert!(is_diagonal(&set.h_total));
    }

    #[test]
    fn fourpod_sideband_entries() {
        let ip = fig4();
        let set = build(&ip, 4).unwrap();
        let b = &set.basis;
        let g = ip.coupling;
        for nx in 0..4 {
            let want = g * ((nx + 1) as f64).sqrt();
            let e = set.h_couple[(b.index(2, &[nx + 1, 1]), b.index(1, &[nx, 1]))];
            assert!((e - c(want, 0.0)).norm() < 1e-12, "{e}");
        }
        for ny in 0..4 {
            let k = ((ny + 1) as f64).sqrt();
            let to1 = set.h_couple[(b.index(3, &[2, ny + 1]), b.index(2, &[2, ny]))];
            let to2 = set.h_couple[(b.index(4, &[2, ny + 1]), b.index(2, &[2, ny]))];
            assert!((to1 - c(0.0, g * k)).norm() < 1e-12);
            assert!((to1 + to2).norm() < 1e-12);
        }
        assert!(hermitian_defect(&set.h_total) == 0.0);
    }

    #[test]
    fn totals_add_up() {
        for set in [build(&fig2(), 5).unwrap(), build(&fig4(), 3).unwrap()] {
            assert!(max_abs(&(&set.h0 + &set.h_couple + &set.h_force - &set.h_total)) < 1e-15);
            let s = set.generator_total().unwrap();
            assert!(max_abs(&(&s + s.adjoint())) < 1e-15, "generator not anti-Hermitian");
            assert!(hermitian_defect(&set.residual_hamiltonian().unwrap()) < 1e-12);
        }
    }

    #[test]
    fn wrong_model_is_rejected() {
        let fs = FockSpace::new(2).unwrap();
        assert!(matches!(build_lambda(&fig4(), fs), Err(Error::Contract(_))));
        assert!(matches!(build_fourpod(&fig2(), fs, fs), Err(Error::Contract(_))));
    }

    #[test]
    fn generator_solves_elimination_condition() {
        for set in [build(&fig2(), 15).unwrap(), build(&fig4(), 6).unwrap()] {
            let (interior, full) = generator_residual(&set).unwrap();
            assert!(interior <= 1e-10, "{interior}");
            // [n̂, a] = −a holds exactly even after truncation
            assert!(full <= 1e-10, "{full}");
        }
        let set = build(&quiet(fig2()), 5).unwrap();
        assert!(max_abs(&set.generator_total().unwrap()) == 0.0);
        assert_eq!(generator_residual(&set).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn lambda_residual_closed_form() {
        let ip = fig2();
        let n_max = 8;
        let set = build_lambda(&ip, FockSpace::new(n_max).unwrap()).unwrap();
        let hres = set.residual_hamiltonian().unwrap();
        let k = ip.coupling * ip.coupling / ip.omega;
        let mask = set.basis.interior_mask();
        for i in (0..set.dim()).filter(|&i| mask[i]) {
            let (s, occ) = set.basis.split(i);
            let n = occ[0] as f64;
            let want = match s {
                0 => -k * n,
                1 => 0.0,
                _ => k * (n + 1.0),
            };
            assert!((hres[(i, i)] - c(want, 0.0)).norm() < 1e-12);
            for j in (0..set.dim()).filter(|&j| j != i && mask[j]) {
                assert!(hres[(i, j)].norm() < 1e-12);
            }
        }
    }

    /// The vacuum block of H0 + ½[H_sb, S] is the effective model up to a
    /// constant, for both signs of the force and with a detuning offset.
    #[test]
    fn elimination_reproduces_effective_models() {
        let cases = [
            (fig2(), 0.0),
            ({
                let mut ip = fig2();
                ip.force_rate[0] = -ip.force_rate[0];
                ip
            }, 0.3),
            (fig4(), 0.0),
            (fig4(), -0.2),
        ];
        for (mut ip, offset) in cases {
            ip.spin_detuning += offset;
            let set = build(&ip, 4).unwrap();
            let s = set.generator_total().unwrap();
            let h_sb = &set.h_couple + &set.h_force;
            let heff = &set.h0 + (&h_sb * &s - &s * &h_sb) * c(0.5, 0.0);
            let spins = ip.model.spin_dim();
            let vac: Vec<usize> = (0..spins).map(|m| set.basis.index(m, &vec![0; ip.model.mode_count()])).collect();
            let block = Operator::from_fn(spins, spins, |i, j| heff[(vac[i], vac[j])]);
            let want = match ip.model {
                SystemModel::Lambda3 => effective_lambda(&ip),
                SystemModel::FourPod5 => effective_fourpod(&ip),
            };
            let diff = block - want;
            let shift = diff[(0, 0)];
            assert!(max_abs(&(diff - identity(spins) * shift)) < 1e-12, "{:?} offset {offset}", ip.model);
        }
    }

    #[test]
    fn effective_lambda_spectrum_and_phase() {
        assert!(max_abs(&effective_lambda_raw(0.0, 1.3, 0.0)) == 0.0);
        let rabi = 0.7;
        let xi = 1.1;
        let h = effective_lambda_raw(rabi, xi, 0.0);
        let mut ev: Vec<f64> = HermitianSpectrum::new(&h).unwrap().values.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let want = [-SQRT_2 * rabi, 0.0, SQRT_2 * rabi];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        // diagonal conjugation, basis order (−1, 0, 1)
        let d = Operator::from_diagonal(&nalgebra::DVector::from_vec(vec![phase(xi), c(1.0, 0.0), phase(-xi)]));
        let h0 = effective_lambda_raw(rabi, 0.0, 0.0);
        assert!(max_abs(&(&d * h0 * d.adjoint() - h)) < 1e-14);
    }

    #[test]
    fn effective_fourpod_spectrum_and_phases() {
        assert!(max_abs(&effective_fourpod_raw(0.0, 0.2, 0.4, 0.0)) == 0.0);
        let rabi = 0.45;
        let h = effective_fourpod_raw(rabi, 0.9, -2.0, 0.0);
        let mut ev: Vec<f64> = HermitianSpectrum::new(&h).unwrap().values.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let want = [-2.0 * rabi, 0.0, 0.0, 0.0, 2.0 * rabi];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        // F along +x: direction 0, both phases equal ξ
        let mut ip = fig4();
        ip.force_rate = [0.5, 0.0];
        assert_eq!(ip.direction(), 0.0);
        let h = effective_fourpod(&ip);
        let m = SystemModel::FourPod5;
        let e = |a, b| h[(m.index_of(a), m.index_of(b))];
        assert!((e(-2, 0) - e(-1, 0)).norm() < 1e-15);
        assert!((e(-2, 0) + phase(ip.phase) * c(ip.rabi(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn displacement_properties() {
        let fs = FockSpace::new(30).unwrap();
        let id = displacement_unitary(0.0, 0.8, fs).unwrap();
        assert!(max_abs(&(id - identity(31))) < 1e-14);
        let (amount, xi) = (0.5, 0.8);
        let d = displacement_unitary(amount, xi, fs).unwrap();
        let psi = &d * basis_state(31, 0);
        let number = fock_operators(30).unwrap().number;
        assert!((expectation(&number, &psi).re - amount * amount).abs() < 1e-8);
        assert!(fidelity(&psi, &coherent_state(phase(xi) * amount, fs)) > 1.0 - 1e-12);
        let back = displacement_unitary(amount, xi + PI, fs).unwrap();
        assert!(max_abs(&(&d * back - identity(31))) < 1e-10);
    }

    /// With g = ω = 0 only the drive f(a†e^{iξ} + a e^{−iξ}) acts, and
    /// e^{−iHt} = D(f·t, ξ − π/2).
    #[test]
    fn free_evolution_is_a_displacement() {
        let mut ip = fig2();
        ip.coupling = 0.0;
        ip.omega = 0.0;
        ip.spin_detuning = 0.0;
        ip.force_rate = [0.37, 0.0];
        let fs = FockSpace::new(30).unwrap();
        let set = build_lambda(&ip, fs).unwrap();
        assert!(set.generator.is_none());
        let t = 2.2;
        let psi = HermitianSpectrum::new(&set.h_total).unwrap().evolve(&set.basis.ground(1), t);
        let d = displacement_unitary(ip.force_rate[0] * t, ip.phase - PI / 2.0, fs).unwrap();
        let want = tensor_state(&basis_state(3, 1), &d.column(0).into_owned());
        assert!(1.0 - fidelity(&psi, &want) <= 1e-8);
    }
}
