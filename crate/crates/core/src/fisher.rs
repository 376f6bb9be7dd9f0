//! Classical and quantum Fisher information, Cramér–Rao bounds and chart
//! changes.
//!
//! Models are evaluated at a point of a [`ParamChart`]. Derivatives come
//! from the model when it provides them, otherwise from central
//! differences with relative step `step` and an absolute floor.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{c, StateVector};

/// Outcome probabilities as a function of the parameters.
pub trait ProbabilityModel: Sync {
    fn outcomes(&self) -> usize;
    fn params(&self) -> usize;
    fn probabilities(&self, lambda: &[f64]) -> Vec<f64>;

    /// ∂p_n/∂λ_i indexed `[n][i]`.
    fn jacobian(&self, _lambda: &[f64]) -> Option<Vec<Vec<f64>>> {
        None
    }

    /// ∂r_n/∂λ_i for real amplitudes with r_n² = p_n. Lets the Fisher sum
    /// keep outcomes whose probability vanishes, through
    /// (∂p)²/p = 4(∂r)².
    fn root_jacobian(&self, _lambda: &[f64]) -> Option<Vec<Vec<f64>>> {
        None
    }
}

/// Pure state as a function of the parameters.
pub trait StateModel: Sync {
    fn dim(&self) -> usize;
    fn params(&self) -> usize;
    fn state(&self, lambda: &[f64]) -> StateVector;

    /// ∂ψ/∂λ_i.
    fn derivatives(&self, _lambda: &[f64]) -> Option<Vec<StateVector>> {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamChart {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl ParamChart {
    pub fn new(names: &[&str], values: &[f64]) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::Contract(format!("{} names for {} values", names.len(), values.len())));
        }
        if !(2..=3).contains(&names.len()) {
            return Err(Error::Contract(format!("charts have 2 or 3 parameters, got {}", names.len())));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Contract(format!("duplicate parameter name {n}")));
            }
        }
        Ok(Self { names: names.iter().map(|s| s.to_string()).collect(), values: values.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn step(&self, i: usize, rel: f64) -> f64 {
        (rel * self.values[i].abs()).max(ABS_STEP_FLOOR)
    }

    fn shifted(&self, i: usize, h: f64) -> Vec<f64> {
        let mut v = self.values.clone();
        v[i] += h;
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FisherKind {
    Classical,
    Quantum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FisherMatrix {
    pub entries: DMatrix<f64>,
    pub chart: ParamChart,
    pub kind: FisherKind,
}

const SYMMETRY_TOL: f64 = 1e-10;

impl FisherMatrix {
    /// Checks symmetry and positive semidefiniteness (relative 10⁻¹⁰) and
    /// stores the symmetrized matrix.
    pub fn new(entries: DMatrix<f64>, chart: ParamChart, kind: FisherKind) -> Result<Self> {
        let p = chart.len();
        if entries.shape() != (p, p) {
            return Err(Error::Contract(format!("{:?} matrix for a {p}-parameter chart", entries.shape())));
        }
        let scale = entries.amax().max(1.0);
        let asym = (&entries - entries.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::Contract(format!("information matrix not symmetric (defect {asym:e})")));
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        let min_eig = sym.clone().symmetric_eigenvalues().min();
        if min_eig < -SYMMETRY_TOL * scale {
            return Err(Error::Contract(format!("information matrix not positive semidefinite (eigenvalue {min_eig:e})")));
        }
        Ok(Self { entries: sym, chart, kind })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.entries)
    }

    /// Largest off-diagonal magnitude.
    pub fn max_off_diagonal(&self) -> f64 {
        let p = self.chart.len();
        (0..p).flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j))).fold(0.0, |acc, (i, j)| {
            acc.max(self.entries[(i, j)].abs())
        })
    }
}

/// Row-major nested copy, for reports.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub const DEFAULT_STEP: f64 = 1e-6;
const ABS_STEP_FLOOR: f64 = 1e-9;
/// Outcomes below this probability need the limiting rule.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Fisher information of the outcome distribution,
/// I_ij = Σ_n (∂_i p_n)(∂_j p_n)/p_n.
pub fn cfi_matrix(model: &dyn ProbabilityModel, chart: &ParamChart, step: f64) -> Result<FisherMatrix> {
    let p = chart.len();
    if model.params() != p {
        return Err(Error::Contract(format!("model takes {} parameters, chart has {p}", model.params())));
    }
    let probs = model.probabilities(&chart.values);
    let analytic = model.jacobian(&chart.values);
    let jac = match &analytic {
        Some(j) => j.clone(),
        None => probability_differences(model, chart, step),
    };
    let roots = model.root_jacobian(&chart.values);

    let mut info = DMatrix::zeros(p, p);
    for (n, &pn) in probs.iter().enumerate() {
        if pn >= PROBABILITY_FLOOR {
            for i in 0..p {
                for j in 0..p {
                    info[(i, j)] += jac[n][i] * jac[n][j] / pn;
                }
            }
            continue;
        }
        match (&analytic, &roots) {
            (Some(_), Some(r)) => {
                for i in 0..p {
                    for j in 0..p {
                        info[(i, j)] += 4.0 * r[n][i] * r[n][j];
                    }
                }
            }
            _ => {
                let slope = jac[n].iter().fold(0.0f64, |a, d| a.max(d.abs()));
                if slope > PROBABILITY_FLOOR.sqrt() {
                    return Err(Error::SingularModel(format!(
                        "outcome {n} has probability {pn:e} but slope {slope:e}; (∂p)²/p diverges"
                    )));
                }
                log::warn!("outcome {n} has probability {pn:e}; excluded from the Fisher sum");
            }
        }
    }
    FisherMatrix::new(info, chart.clone(), FisherKind::Classical)
}

fn probability_differences(model: &dyn ProbabilityModel, chart: &ParamChart, step: f64) -> Vec<Vec<f64>> {
    let p = chart.len();
    let mut jac = vec![vec![0.0; p]; model.outcomes()];
    for i in 0..p {
        let h = chart.step(i, step);
        let up = model.probabilities(&chart.shifted(i, h));
        let dn = model.probabilities(&chart.shifted(i, -h));
        for n in 0..model.outcomes() {
            jac[n][i] = (up[n] - dn[n]) / (2.0 * h);
        }
    }
    jac
}

fn state_and_derivatives(model: &dyn StateModel, chart: &ParamChart, step: f64) -> Result<(StateVector, Vec<StateVector>)> {
    let p = chart.len();
    if model.params() != p {
        return Err(Error::Contract(format!("model takes {} parameters, chart has {p}", model.params())));
    }
    let psi = model.state(&chart.values);
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Contract(format!("state model output has norm {norm}")));
    }
    let derivs = match model.derivatives(&chart.values) {
        Some(d) => d,
        None => (0..p)
            .map(|i| {
                let h = chart.step(i, step);
                (model.state(&chart.shifted(i, h)) - model.state(&chart.shifted(i, -h))) / c(2.0 * h, 0.0)
            })
            .collect(),
    };
    Ok((psi, derivs))
}

/// H_ij = 4 Re{⟨∂_iψ|∂_jψ⟩ − ⟨∂_iψ|ψ⟩⟨ψ|∂_jψ⟩}.
pub fn qfi_pure(model: &dyn StateModel, chart: &ParamChart, step: f64) -> Result<FisherMatrix> {
    let (psi, d) = state_and_derivatives(model, chart, step)?;
    let p = chart.len();
    let h = DMatrix::from_fn(p, p, |i, j| {
        4.0 * (d[i].dotc(&d[j]) - d[i].dotc(&psi) * psi.dotc(&d[j])).re
    });
    FisherMatrix::new(h, chart.clone(), FisherKind::Quantum)
}

/// Im⟨∂_iψ|∂_jψ⟩; vanishing entries mean the bound can be saturated.
pub fn weak_commutativity(model: &dyn StateModel, chart: &ParamChart, step: f64) -> Result<DMatrix<f64>> {
    let (_, d) = state_and_derivatives(model, chart, step)?;
    let p = chart.len();
    Ok(DMatrix::from_fn(p, p, |i, j| if i == j { 0.0 } else { d[i].dotc(&d[j]).im }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CramerRao {
    /// (νF)⁻¹
    pub covariance: DMatrix<f64>,
    pub condition: f64,
    pub shots: u64,
}

impl CramerRao {
    /// √ of the diagonal.
    pub fn std_devs(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| v.sqrt()).collect()
    }
}

const SINGULAR_TOL: f64 = 1e-12;

/// Covariance lower bound (νF)⁻¹.
pub fn crb(f: &FisherMatrix, shots: u64) -> Result<CramerRao> {
    if shots == 0 {
        return Err(Error::Contract("need at least one repetition".into()));
    }
    let eig = SymmetricEigen::new(f.entries.clone());
    let (kmin, &lmin) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let lmax = eig.eigenvalues.max();
    if lmax <= 0.0 || lmin <= SINGULAR_TOL * lmax {
        let v = eig.eigenvectors.column(kmin);
        let direction = f
            .chart
            .names
            .iter()
            .zip(v.iter())
            .filter(|(_, w)| w.abs() > 1e-6)
            .map(|(n, w)| format!("{w:+.4}·{n}"))
            .collect::<Vec<_>>()
            .join(" ");
        return Err(Error::Singular { direction });
    }
    let inv = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / (l * shots as f64)))
        * eig.eigenvectors.transpose();
    Ok(CramerRao { covariance: inv, condition: lmax / lmin, shots })
}

/// F' = JᵀFJ with J_ij = ∂λ_old,i/∂λ_new,j.
pub fn reparameterize(f: &FisherMatrix, jacobian: &DMatrix<f64>, new_chart: ParamChart) -> Result<FisherMatrix> {
    let p = f.chart.len();
    if jacobian.shape() != (p, new_chart.len()) || new_chart.len() != p {
        return Err(Error::Contract(format!("jacobian {:?} does not map a {p}-parameter chart", jacobian.shape())));
    }
    let sv = jacobian.clone().singular_values();
    if sv.min() <= 1e-14 * sv.max().max(f64::MIN_POSITIVE) {
        return Err(Error::Contract("jacobian of the chart change is singular".into()));
    }
    FisherMatrix::new(jacobian.transpose() * &f.entries * jacobian, new_chart, f.kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{FourPodReadout, LambdaReadout};
    use crate::hilbert::{phase, C64};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2};

    struct Constant;
    impl ProbabilityModel for Constant {
        fn outcomes(&self) -> usize {
            3
        }
        fn params(&self) -> usize {
            2
        }
        fn probabilities(&self, _: &[f64]) -> Vec<f64> {
            vec![0.2, 0.3, 0.5]
        }
    }

    /// Hides the analytic derivatives of a readout model.
    struct Numeric<'a, M>(&'a M);
    impl<M: ProbabilityModel> ProbabilityModel for Numeric<'_, M> {
        fn outcomes(&self) -> usize {
            self.0.outcomes()
        }
        fn params(&self) -> usize {
            self.0.params()
        }
        fn probabilities(&self, l: &[f64]) -> Vec<f64> {
            self.0.probabilities(l)
        }
    }
    impl<M: StateModel> StateModel for Numeric<'_, M> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn params(&self) -> usize {
            self.0.params()
        }
        fn state(&self, l: &[f64]) -> StateVector {
            self.0.state(l)
        }
    }

    /// Multiplies a state model by a parameter-dependent global phase.
    struct Gauged<'a, M>(&'a M);
    impl<M: StateModel> StateModel for Gauged<'_, M> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn params(&self) -> usize {
            self.0.params()
        }
        fn state(&self, l: &[f64]) -> StateVector {
            let theta = 3.0 * l[0] + l[1].sin();
            self.0.state(l) * phase(theta)
        }
    }

    fn lambda_chart(omega: f64, xi: f64) -> ParamChart {
        ParamChart::new(&["omega", "xi"], &[omega, xi]).unwrap()
    }

    #[test]
    fn chart_validation() {
        assert!(ParamChart::new(&["a", "a"], &[1.0, 2.0]).is_err());
        assert!(ParamChart::new(&["a"], &[1.0]).is_err());
        assert!(ParamChart::new(&["a", "b"], &[1.0]).is_err());
    }

    #[test]
    fn constant_model_has_no_information() {
        let f = cfi_matrix(&Constant, &lambda_chart(0.3, 0.2), DEFAULT_STEP).unwrap();
        assert_eq!(f.entries, DMatrix::zeros(2, 2));
    }

    #[test]
    fn lambda_cfi_at_quarter_cycle() {
        // √2Ωt = π/2: p₀ = 0 and only the limiting rule recovers 8t²
        let t = 1.7;
        let omega = PI / (2.0 * SQRT_2 * t);
        let f = cfi_matrix(&LambdaReadout { time: t }, &lambda_chart(omega, 0.4), DEFAULT_STEP).unwrap();
        assert_relative_eq!(f.get(0, 0), 8.0 * t * t, max_relative = 1e-12);
        assert_relative_eq!(f.get(1, 1), 4.0, max_relative = 1e-12);
        assert!(f.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn finite_differences_drop_vanishing_outcomes() {
        let t = 1.7;
        let omega = PI / (2.0 * SQRT_2 * t);
        let model = LambdaReadout { time: t };
        let f = cfi_matrix(&Numeric(&model), &lambda_chart(omega, 0.4), DEFAULT_STEP).unwrap();
        // the Ω information sits entirely in the dropped p₀ outcome
        assert!(f.get(0, 0) < 1e-3 * 8.0 * t * t);
        assert_relative_eq!(f.get(1, 1), 4.0, max_relative = 1e-6);
    }

    #[test]
    fn lambda_qfi_closed_form() {
        let t = 2.3;
        let model = LambdaReadout { time: t };
        for &(omega, xi) in &[(0.1, 0.3), (0.77, 2.0), (1.3, -0.8)] {
            let h = qfi_pure(&model, &lambda_chart(omega, xi), DEFAULT_STEP).unwrap();
            assert_relative_eq!(h.get(0, 0), 8.0 * t * t, max_relative = 1e-12);
            assert_relative_eq!(h.get(1, 1), 4.0 * (SQRT_2 * omega * t).sin().powi(2), max_relative = 1e-12);
        }
    }

    #[test]
    fn fourpod_qfi_structure() {
        let model = FourPodReadout { time: 0.9 };
        let chart = ParamChart::new(&["omega", "xi", "phi"], &[0.6, 0.4, -1.2]).unwrap();
        let h = qfi_pure(&model, &chart, DEFAULT_STEP).unwrap();
        assert!(h.max_off_diagonal() < 1e-12);
        assert_relative_eq!(h.get(1, 1), h.get(2, 2), max_relative = 1e-12);
        let i = cfi_matrix(&model, &chart, DEFAULT_STEP).unwrap();
        assert!((&h.entries - &i.entries).amax() < 1e-10);
    }

    #[test]
    fn qfi_is_gauge_invariant() {
        let model = LambdaReadout { time: 1.1 };
        let chart = lambda_chart(0.5, 0.9);
        let plain = qfi_pure(&model, &chart, DEFAULT_STEP).unwrap();
        let gauged = qfi_pure(&Gauged(&model), &chart, DEFAULT_STEP).unwrap();
        assert!((&plain.entries - &gauged.entries).amax() < 1e-8);
    }

    #[test]
    fn weak_commutativity_diagonal_is_zero() {
        let w = weak_commutativity(&LambdaReadout { time: 1.0 }, &lambda_chart(0.2, 0.1), DEFAULT_STEP).unwrap();
        assert_eq!(w[(0, 0)], 0.0);
        assert_eq!(w[(1, 1)], 0.0);
    }

    #[test]
    fn rejects_unnormalized_states() {
        struct Fat;
        impl StateModel for Fat {
            fn dim(&self) -> usize {
                2
            }
            fn params(&self) -> usize {
                2
            }
            fn state(&self, _: &[f64]) -> StateVector {
                StateVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)])
            }
        }
        assert!(matches!(qfi_pure(&Fat, &lambda_chart(0.0, 0.0), DEFAULT_STEP), Err(Error::Contract(_))));
    }

    #[test]
    fn bound_examples() {
        let t = 1.0;
        let f = FisherMatrix::new(
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![8.0 * t * t, 4.0])),
            lambda_chart(0.1, 0.2),
            FisherKind::Quantum,
        )
        .unwrap();
        let b = crb(&f, 100).unwrap();
        assert_relative_eq!(b.covariance[(0, 0)], 1.0 / 800.0, max_relative = 1e-14);
        assert_relative_eq!(b.covariance[(1, 1)], 1.0 / 400.0, max_relative = 1e-14);
        let b2 = crb(&f, 200).unwrap();
        assert!((&b.covariance * 0.5 - &b2.covariance).amax() < 1e-18);
    }

    #[test]
    fn singular_bound_names_direction() {
        let f = FisherMatrix::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            lambda_chart(0.1, 0.2),
            FisherKind::Classical,
        )
        .unwrap();
        match crb(&f, 10) {
            Err(Error::Singular { direction }) => assert!(direction.contains("xi") && !direction.contains("omega")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chart_change_examples() {
        let f = FisherMatrix::new(DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]), lambda_chart(0.1, 0.2), FisherKind::Quantum)
            .unwrap();
        let same = reparameterize(&f, &DMatrix::identity(2, 2), f.chart.clone()).unwrap();
        assert_eq!(same.entries, f.entries);
        // λ_old = c·λ_new scales the information by c²
        let k = 2.5;
        let scaled = reparameterize(&f, &(DMatrix::identity(2, 2) * k), f.chart.clone()).unwrap();
        assert!((&scaled.entries - &f.entries * (k * k)).amax() < 1e-13);
        assert!(reparameterize(&f, &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]), f.chart.clone()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn saturation_and_ordering(t in 0.2f64..4.0, omega in 0.01f64..1.0, xi in -3.0f64..3.0, phi in -3.0f64..3.0) {
            let lr = LambdaReadout { time: t };
            let chart = lambda_chart(omega, xi);
            let i = cfi_matrix(&lr, &chart, DEFAULT_STEP).unwrap();
            let h = qfi_pure(&lr, &chart, DEFAULT_STEP).unwrap();
            prop_assert!((&h.entries - &i.entries).amax() <= 1e-8 * h.entries.amax().max(1.0));
            let gap_min = (&h.entries - &i.entries).symmetric_eigenvalues().min();
            prop_assert!(gap_min >= -1e-8);
            prop_assert!(h.max_off_diagonal() <= 1e-10 * h.entries.amax().max(1.0));

            let fr = FourPodReadout { time: t };
            let chart = ParamChart::new(&["omega", "xi", "phi"], &[omega, xi, phi]).unwrap();
            let i = cfi_matrix(&fr, &chart, DEFAULT_STEP).unwrap();
            let h = qfi_pure(&fr, &chart, DEFAULT_STEP).unwrap();
            prop_assert!((&h.entries - &i.entries).amax() <= 1e-8 * h.entries.amax().max(1.0));
            let w = weak_commutativity(&fr, &chart, DEFAULT_STEP).unwrap();
            prop_assert!(w.amax() <= 1e-10);
        }

        #[test]
        fn analytic_and_numeric_derivatives_agree(t in 0.2f64..4.0, omega in 0.05f64..1.0, xi in -3.0f64..3.0) {
            let lr = LambdaReadout { time: t };
            let chart = lambda_chart(omega, xi);
            prop_assume!(lr.probabilities(&chart.values).iter().all(|&p| p > 1e-3));
            let a = cfi_matrix(&lr, &chart, DEFAULT_STEP).unwrap();
            let n = cfi_matrix(&Numeric(&lr), &chart, DEFAULT_STEP).unwrap();
            prop_assert!((&a.entries - &n.entries).amax() <= 1e-6 * a.entries.amax());
            let qa = qfi_pure(&lr, &chart, DEFAULT_STEP).unwrap();
            let qn = qfi_pure(&Numeric(&lr), &chart, DEFAULT_STEP).unwrap();
            prop_assert!((&qa.entries - &qn.entries).amax() <= 1e-6 * qa.entries.amax());
        }
    }
}
