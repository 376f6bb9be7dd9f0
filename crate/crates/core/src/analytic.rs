//! Closed-form results for the effective spin models on resonance.
//!
//! Every vector and matrix here uses the ascending-m basis of
//! [`SystemModel::labels`]. The published matrices list their rows in the
//! orders (1, −1, 0) and (−2, −1, 1, 2, 0); they are permuted on
//! construction.
//!
//! Sign conventions: with Ω ≥ 0 the propagators below equal
//! exp(−i·H_eff·t) for an effective phase shifted by π, i.e.
//! `propagator_lambda(Ωt, θ − π)` evolves under
//! [`effective_lambda_raw`](crate::hamiltonians::effective_lambda_raw)`(Ω, θ)`.
//! Populations depend on the phases only modulo π, so the shift is
//! invisible in every readout.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::DVector;

use crate::fisher::{ProbabilityModel, StateModel};
use crate::hamiltonians::SystemModel;
use crate::hilbert::{c, phase, Operator, StateVector, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CayleyKlein {
    pub a: C64,
    pub b: C64,
}

impl CayleyKlein {
    /// a = cos(A/2), b = −i·sin(A/2) for pulse area A.
    pub fn resonant(area: f64) -> Self {
        let half = area / 2.0;
        Self { a: c(half.cos(), 0.0), b: c(0.0, -half.sin()) }
    }

    /// Area 2√2·Ωt.
    pub fn lambda(omega_t: f64) -> Self {
        Self::resonant(2.0 * SQRT_2 * omega_t)
    }

    /// Area 4Ωt, so a = cos 2Ωt.
    pub fn fourpod(omega_t: f64) -> Self {
        Self::resonant(4.0 * omega_t)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }
}

fn permuted(model: SystemModel, order: &[i32], rows: &[Vec<C64>]) -> Operator {
    let d = model.spin_dim();
    let mut u = Operator::zeros(d, d);
    for (r, row) in rows.iter().enumerate() {
        for (col, &z) in row.iter().enumerate() {
            u[(model.index_of(order[r]), model.index_of(order[col]))] = z;
        }
    }
    u
}

/// Three-level resonant propagator.
pub fn propagator_lambda(omega_t: f64, xi: f64) -> Operator {
    let CayleyKlein { a, b } = CayleyKlein::lambda(omega_t);
    let one = c(1.0, 0.0);
    let r = FRAC_1_SQRT_2;
    let rows = vec![
        vec![(a + one) * 0.5, (a - one) * 0.5 * phase(-2.0 * xi), b * r * phase(-xi)],
        vec![(a - one) * 0.5 * phase(2.0 * xi), (a + one) * 0.5, b * r * phase(xi)],
        vec![-b.conj() * r * phase(xi), -b.conj() * r * phase(-xi), a.conj()],
    ];
    permuted(SystemModel::Lambda3, &[1, -1, 0], &rows)
}

/// Five-level resonant propagator with φ± = ξ ± φ.
///
/// Unitarity fixes the (1, 2) entry to ¼(a − 1)e^{2iφ}: the excited block
/// is I + (a − 1)|B⟩⟨B| with |B⟩ = ½(e^{iφ₊}, e^{iφ₋}, e^{−iφ₋}, e^{−iφ₊}).
pub fn propagator_fourpod(omega_t: f64, xi: f64, phi: f64) -> Operator {
    let CayleyKlein { a, b } = CayleyKlein::fourpod(omega_t);
    let (pp, pm) = (xi + phi, xi - phi);
    let diag = (a + 3.0) * 0.25;
    let off = (a - 1.0) * 0.25;
    let half_b = b * 0.5;
    let bc = -b.conj() * 0.5;
    let rows = vec![
        vec![diag, off * phase(2.0 * phi), off * phase(2.0 * xi), off * phase(2.0 * pp), half_b * phase(pp)],
        vec![off * phase(-2.0 * phi), diag, off * phase(2.0 * pm), off * phase(2.0 * xi), half_b * phase(pm)],
        vec![off * phase(-2.0 * xi), off * phase(-2.0 * pm), diag, off * phase(2.0 * phi), half_b * phase(-pm)],
        vec![off * phase(-2.0 * pp), off * phase(-2.0 * xi), off * phase(-2.0 * phi), diag, half_b * phase(-pp)],
        vec![bc * phase(-pp), bc * phase(-pm), bc * phase(pm), bc * phase(pp), a.conj()],
    ];
    permuted(SystemModel::FourPod5, &[-2, -1, 1, 2, 0], &rows)
}

/// sin(√2Ωt)(sin ξ|−1⟩ − i cos ξ|1⟩) + cos(√2Ωt)|0⟩
pub fn post_pulse_state_lambda(omega_t: f64, xi: f64) -> StateVector {
    let x = SQRT_2 * omega_t;
    let (s, co) = x.sin_cos();
    DVector::from_vec(vec![c(s * xi.sin(), 0.0), c(co, 0.0), c(0.0, -s * xi.cos())])
}

/// cos(2Ωt)|0⟩ − (i/√2)·sin(2Ωt)·{cos φ₊|2⟩ + i sin φ₊|−2⟩ + cos φ₋|1⟩ + i sin φ₋|−1⟩}
///
/// The sin(2Ωt) factor on the braces is required for normalization.
pub fn post_pulse_state_fourpod(omega_t: f64, xi: f64, phi: f64) -> StateVector {
    let (s, co) = (2.0 * omega_t).sin_cos();
    let (pp, pm) = (xi + phi, xi - phi);
    let k = s * FRAC_1_SQRT_2;
    DVector::from_vec(vec![
        c(k * pp.sin(), 0.0),
        c(k * pm.sin(), 0.0),
        c(co, 0.0),
        c(0.0, -k * pm.cos()),
        c(0.0, -k * pp.cos()),
    ])
}

/// Populations (−1, 0, 1).
pub fn probabilities_lambda(omega_t: f64, xi: f64) -> [f64; 3] {
    let s2 = (SQRT_2 * omega_t).sin().powi(2);
    [s2 * xi.sin().powi(2), 1.0 - s2, s2 * xi.cos().powi(2)]
}

/// Populations (−2, −1, 0, 1, 2).
pub fn probabilities_fourpod(omega_t: f64, xi: f64, phi: f64) -> [f64; 5] {
    let s2 = (2.0 * omega_t).sin().powi(2);
    let (pp, pm) = (xi + phi, xi - phi);
    let h = 0.5 * s2;
    [h * pp.sin().powi(2), h * pm.sin().powi(2), 1.0 - s2, h * pm.cos().powi(2), h * pp.cos().powi(2)]
}

/// Post-pulse readout of the Λ protocol at a fixed time, parameters (Ω, ξ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaReadout {
    pub time: f64,
}

impl LambdaReadout {
    /// Real amplitudes r with p = r² and their derivatives; the state is
    /// (r₋₁, r₀, −i r₁).
    fn roots(&self, l: &[f64]) -> ([f64; 3], [[f64; 3]; 2]) {
        let (omega, xi) = (l[0], l[1]);
        let k = SQRT_2 * self.time;
        let (s, co) = (k * omega).sin_cos();
        let (sx, cx) = xi.sin_cos();
        let r = [s * sx, co, s * cx];
        let d_omega = [k * co * sx, -k * s, k * co * cx];
        let d_xi = [s * cx, 0.0, -s * sx];
        (r, [d_omega, d_xi])
    }
}

const LAMBDA_PHASES: [C64; 3] = [C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, -1.0)];

impl ProbabilityModel for LambdaReadout {
    fn outcomes(&self) -> usize {
        3
    }

    fn params(&self) -> usize {
        2
    }

    fn probabilities(&self, l: &[f64]) -> Vec<f64> {
        probabilities_lambda(l[0] * self.time, l[1]).to_vec()
    }

    fn jacobian(&self, l: &[f64]) -> Option<Vec<Vec<f64>>> {
        let (r, dr) = self.roots(l);
        Some((0..3).map(|n| dr.iter().map(|d| 2.0 * r[n] * d[n]).collect()).collect())
    }

    fn root_jacobian(&self, l: &[f64]) -> Option<Vec<Vec<f64>>> {
        let (_, dr) = self.roots(l);
        Some((0..3).map(|n| dr.iter().map(|d| d[n]).collect()).collect())
    }
}

impl StateModel for LambdaReadout {
    fn dim(&self) -> usize {
        3
    }

    fn params(&self) -> usize {
        2
    }

    fn state(&self, l: &[f64]) -> StateVector {
        post_pulse_state_lambda(l[0] * self.time, l[1])
    }

    fn derivatives(&self, l: &[f64]) -> Option<Vec<StateVector>> {
        let (_, dr) = self.roots(l);
        Some(dr.iter().map(|d| DVector::from_fn(3, |n, _| LAMBDA_PHASES[n] * d[n])).collect())
    }
}

/// Post-pulse readout of the four-pod protocol at a fixed time, parameters
/// (Ω, ξ, φ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourPodReadout {
    pub time: f64,
}

const FOURPOD_PHASES: [C64; 5] =
    [C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, -1.0)];

impl FourPodReadout {
    /// Real amplitudes in the order (−2, −1, 0, 1, 2); the state carries an
    /// extra −i on the |1⟩ and |2⟩ components.
    fn roots(&self, l: &[f64]) -> ([f64; 5], [[f64; 5]; 3]) {
        let (omega, xi, phi) = (l[0], l[1], l[2]);
        let k = 2.0 * self.time;
        let (s, co) = (k * omega).sin_cos();
        let (sp, cp) = (xi + phi).sin_cos();
        let (sm, cm) = (xi - phi).sin_cos();
        let h = FRAC_1_SQRT_2;
        let r = [h * s * sp, h * s * sm, co, h * s * cm, h * s * cp];
        let d_omega = [h * k * co * sp, h * k * co * sm, -k * s, h * k * co * cm, h * k * co * cp];
        let d_xi = [h * s * cp, h * s * cm, 0.0, -h * s * sm, -h * s * sp];
        let d_phi = [h * s * cp, -h * s * cm, 0.0, h * s * sm, -h * s * sp];
        (r, [d_omega, d_xi, d_phi])
    }
}

impl ProbabilityModel for FourPodReadout {
    fn outcomes(&self) -> usize {
        5
    }

    fn params(&self) -> usize {
        3
    }

    fn probabilities(&self, l: &[f64]) -> Vec<f64> {
        probabilities_fourpod(l[0] * self.time, l[1], l[2]).to_vec()
    }

    fn jacobian(&self, l: &[f64]) -> Option<Vec<Vec<f64>>> {
        let (r, dr) = self.roots(l);
        Some((0..5).map(|n| dr.iter().map(|d| 2.0 * r[n] * d[n]).collect()).collect())
    }

    fn root_jacobian(&self, l: &[f64]) -> Option<Vec<Vec<f64>>> {
        let (_, dr) = self.roots(l);
        Some((0..5).map(|n| dr.iter().map(|d| d[n]).collect()).collect())
    }
}

impl StateModel for FourPodReadout {
    fn dim(&self) -> usize {
        5
    }

    fn params(&self) -> usize {
        3
    }

    fn state(&self, l: &[f64]) -> StateVector {
        post_pulse_state_fourpod(l[0] * self.time, l[1], l[2])
    }

    fn derivatives(&self, l: &[f64]) -> Option<Vec<StateVector>> {
        let (_, dr) = self.roots(l);
        Some(dr.iter().map(|d| DVector::from_fn(5, |n, _| FOURPOD_PHASES[n] * d[n])).collect())
    }
}
