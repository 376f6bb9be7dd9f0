//! Full protocol simulation: prepare |0⟩ ⊗ vacuum, evolve under the
//! truncated interaction Hamiltonian, apply the π/2 readout pulse(s) and
//! read the spin populations with the phonons traced out.
//!
//! Times are in ms. Spaces up to [`DENSE_LIMIT`] are propagated through a
//! cached eigendecomposition, larger ones through a Lanczos space built
//! once for the whole time grid.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::Serialize;

use crate::analytic::{probabilities_fourpod, probabilities_lambda};
use crate::error::{Error, Result};
use crate::hamiltonians::{build, HamiltonianSet, SystemModel};
use crate::hilbert::{c, CompositeBasis, HermitianSpectrum, LanczosPropagator, Operator, SparseOperator, StateVector};
use crate::params::{InternalParams, ProtocolParams};

/// Largest dimension propagated by dense diagonalization.
pub const DENSE_LIMIT: usize = 1000;
const LANCZOS_TOL: f64 = 1e-11;
const NORM_TOL: f64 = 1e-10;
const ROW_SUM_TOL: f64 = 1e-10;
const CLAMP_TOL: f64 = 1e-12;
/// Points in the default time grid.
pub const DEFAULT_POINTS: usize = 400;

/// Spin-only readout pulse in the ascending-m basis.
///
/// Λ: |±1⟩ → (|1⟩ ∓ |−1⟩)/√2. Four-pod: |±1⟩ → (|1⟩ ± |−1⟩)/√2 and
/// |±2⟩ → (|2⟩ ± |−2⟩)/√2. |0⟩ is left alone.
pub fn pulse_matrix(model: SystemModel) -> Operator {
    let d = model.spin_dim();
    let mut u = Operator::zeros(d, d);
    u[(model.index_of(0), model.index_of(0))] = c(1.0, 0.0);
    let r = FRAC_1_SQRT_2;
    let levels: &[i32] = match model {
        SystemModel::Lambda3 => &[1],
        SystemModel::FourPod5 => &[1, 2],
    };
    let minus_sign = match model {
        SystemModel::Lambda3 => -1.0,
        SystemModel::FourPod5 => 1.0,
    };
    for &k in levels {
        let (up, dn) = (model.index_of(k), model.index_of(-k));
        // image of |k⟩
        u[(up, up)] = c(r, 0.0);
        u[(dn, up)] = c(minus_sign * r, 0.0);
        // image of |−k⟩
        u[(up, dn)] = c(r, 0.0);
        u[(dn, dn)] = c(-minus_sign * r, 0.0);
    }
    u
}

/// Applies the readout pulse to the spin factor of ψ.
pub fn apply_pi_half(psi: &StateVector, model: SystemModel) -> Result<StateVector> {
    let d = model.spin_dim();
    if psi.is_empty() || psi.len() % d != 0 {
        return Err(Error::Contract(format!("state of dimension {} is not on a {d}-level spin space", psi.len())));
    }
    Ok(apply_spin(&pulse_matrix(model), psi))
}

fn apply_spin(u: &Operator, psi: &StateVector) -> StateVector {
    let d = u.nrows();
    let block = psi.len() / d;
    let mut out = StateVector::zeros(psi.len());
    for s in 0..d {
        for s2 in 0..d {
            let z = u[(s, s2)];
            if z.norm() == 0.0 {
                continue;
            }
            for k in 0..block {
                out[s * block + k] += z * psi[s2 * block + k];
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbabilityTrajectory {
    pub model: SystemModel,
    /// ms
    pub times: Vec<f64>,
    /// One row per time, outcomes in ascending m.
    pub probabilities: Vec<Vec<f64>>,
}

impl ProbabilityTrajectory {
    fn new(model: SystemModel, times: Vec<f64>, probabilities: Vec<Vec<f64>>) -> Result<Self> {
        let probabilities = probabilities.into_iter().map(clamp_row).collect::<Result<Vec<_>>>()?;
        Ok(Self { model, times, probabilities })
    }

    /// Population of level `m` at every time.
    pub fn column(&self, m: i32) -> Vec<f64> {
        let k = self.model.index_of(m);
        self.probabilities.iter().map(|row| row[k]).collect()
    }
}

fn clamp_row(row: Vec<f64>) -> Result<Vec<f64>> {
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::Contract(format!("populations sum to {sum}")));
    }
    row.into_iter()
        .map(|p| {
            if !(-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&p) {
                Err(Error::Contract(format!("population {p} outside [0, 1]")))
            } else {
                Ok(p.clamp(0.0, 1.0))
            }
        })
        .collect()
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Contract("times must be finite and non-negative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Contract("times must be sorted ascending".into()));
    }
    Ok(())
}

/// ψ(t) = e^{−iH t}ψ0 at every requested time.
pub fn evolve_populations(set: &HamiltonianSet, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
    check_times(times)?;
    if psi0.len() != set.dim() {
        return Err(Error::Contract(format!("state of dimension {} for a {}-dimensional space", psi0.len(), set.dim())));
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::Contract(format!("initial state has norm {norm}")));
    }
    let t_max = times.last().copied().unwrap_or(0.0);
    let states: Vec<StateVector> = if set.dim() <= DENSE_LIMIT {
        let spectrum = HermitianSpectrum::new(&set.h_total)?;
        let coords = spectrum.coords(psi0);
        times.iter().map(|&t| if t == 0.0 { psi0.clone() } else { spectrum.evolve_coords(&coords, t) }).collect()
    } else {
        let sparse = SparseOperator::from_dense(&set.h_total);
        let lanczos = LanczosPropagator::build(&sparse, psi0, t_max, LANCZOS_TOL)?;
        log::info!("lanczos: dimension {} reduced to {}", set.dim(), lanczos.krylov_dim());
        times.iter().map(|&t| if t == 0.0 { psi0.clone() } else { lanczos.state(t) }).collect()
    };
    for (t, psi) in times.iter().zip(&states) {
        let n = psi.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Contract(format!("norm drifted to {n} at t = {t}")));
        }
    }
    Ok(states)
}

/// Spin populations after the readout pulse, phonons traced out.
pub fn readout(basis: &CompositeBasis, model: SystemModel, psi: &StateVector) -> Result<Vec<f64>> {
    Ok(basis.spin_populations(&apply_pi_half(psi, model)?))
}

/// Simulates the protocol for already-resolved parameters.
pub fn simulate(ip: &InternalParams, n_max: usize, times: &[f64]) -> Result<ProbabilityTrajectory> {
    let set = build(ip, n_max)?;
    let psi0 = set.basis.ground(ip.model.index_of(0));
    let states = evolve_populations(&set, &psi0, times)?;
    let rows = states.iter().map(|psi| readout(&set.basis, ip.model, psi)).collect::<Result<Vec<_>>>()?;
    ProbabilityTrajectory::new(ip.model, times.to_vec(), rows)
}

pub fn run_protocol(p: &ProtocolParams, times: &[f64]) -> Result<ProbabilityTrajectory> {
    simulate(&p.internal()?, p.run().n_max, times)
}

/// Resonant closed-form populations at the same times. A residual spin
/// detuning is ignored with a warning.
pub fn analytic_trajectory(ip: &InternalParams, times: &[f64]) -> Result<ProbabilityTrajectory> {
    check_times(times)?;
    if ip.residual_detuning().abs() > 1e-12 * ip.omega {
        log::warn!("closed form assumes resonance; residual detuning {} rad/ms ignored", ip.residual_detuning());
    }
    let rabi = ip.rabi();
    let rows = times
        .iter()
        .map(|&t| match ip.model {
            SystemModel::Lambda3 => probabilities_lambda(rabi * t, ip.phase + ip.direction()).to_vec(),
            SystemModel::FourPod5 => probabilities_fourpod(rabi * t, ip.phase, ip.direction()).to_vec(),
        })
        .collect();
    ProbabilityTrajectory::new(ip.model, times.to_vec(), rows)
}

/// [`DEFAULT_POINTS`] uniform times over two population periods.
pub fn default_times(ip: &InternalParams) -> Result<Vec<f64>> {
    let period = ip.population_period();
    if !period.is_finite() {
        return Err(Error::param("force", "effective Rabi frequency is zero; no natural time scale"));
    }
    let stop = 2.0 * period;
    let n = DEFAULT_POINTS;
    Ok((0..n).map(|k| stop * k as f64 / (n - 1) as f64).collect())
}

/// Times from the run settings, or [`default_times`].
pub fn protocol_times(p: &ProtocolParams) -> Result<Vec<f64>> {
    match p.run().times {
        Some(spec) => crate::params::parse_time_grid(&spec),
        None => default_times(&p.internal()?),
    }
}

/// Largest |Δp| over all times and outcomes.
pub fn max_abs_deviation(a: &ProbabilityTrajectory, b: &ProbabilityTrajectory) -> Result<f64> {
    if a.model != b.model || a.times != b.times {
        return Err(Error::Contract("trajectories are on different models or time grids".into()));
    }
    Ok(a.probabilities
        .iter()
        .zip(&b.probabilities)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max))
}

/// Deviation between `n_max` and `2·n_max` truncations.
pub fn truncation_change(ip: &InternalParams, n_max: usize, times: &[f64]) -> Result<f64> {
    let coarse = simulate(ip, n_max, times)?;
    let fine = simulate(ip, 2 * n_max, times)?;
    max_abs_deviation(&coarse, &fine)
}
