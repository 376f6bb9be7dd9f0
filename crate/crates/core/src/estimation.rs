//! Shot sampling, maximum-likelihood fits and Monte-Carlo covariance
//! studies against the Cramér–Rao bound.
//!
//! Readout probabilities depend on the phases only through sin² and cos²,
//! so a single readout time identifies them only on a quarter period. The
//! fits therefore run on a box in search coordinates:
//!
//! - Λ: (Ω, ξ) with √2Ωt ∈ [0, π/2] and ξ ∈ [0, π/2],
//! - four-pod: (Ω, φ₊, φ₋) with 2Ωt ∈ [0, π/2] and φ± ∈ [0, π/2],
//!
//! and results are reported in the chart (Ω, ξ) or (Ω, ξ, φ) with
//! ξ = (φ₊ + φ₋)/2, φ = (φ₊ − φ₋)/2.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{probabilities_fourpod, probabilities_lambda, FourPodReadout, LambdaReadout};
use crate::error::{Error, Result};
use crate::fisher::{cfi_matrix, crb, matrix_rows, ParamChart, ProbabilityModel, DEFAULT_STEP};
use crate::hamiltonians::SystemModel;
use crate::params::{InternalParams, ProtocolParams};

const LOG_FLOOR: f64 = 1e-30;
/// Grid points per search axis.
pub const GRID_POINTS: usize = 64;
/// Simplex diameter below which a fit counts as converged.
pub const CONVERGED_DIAMETER: f64 = 1e-6;
const SIMPLEX_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 5000;
/// Information matrices with a larger condition number are treated as
/// non-identifiable.
const MAX_CONDITION: f64 = 1e10;

/// Outcome counts per readout time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementRecord {
    /// ms
    pub times: Vec<f64>,
    /// Counts in ascending m, one row per time.
    pub counts: Vec<Vec<u64>>,
    pub shots: u64,
    pub seed: u64,
}

impl MeasurementRecord {
    fn weights(&self) -> Vec<Vec<f64>> {
        self.counts.iter().map(|row| row.iter().map(|&n| n as f64).collect()).collect()
    }
}

fn check_distribution(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < -1e-12) {
        return Err(Error::param("probabilities", "entries must be finite and non-negative"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::param("probabilities", format!("sum to {sum}, not 1")));
    }
    Ok(())
}

/// Multinomial counts drawn as a chain of binomials.
pub fn sample_with(probs: &[f64], shots: u64, rng: &mut ChaCha20Rng) -> Result<Vec<u64>> {
    check_distribution(probs)?;
    if shots == 0 {
        return Err(Error::param("shots", "need at least one repetition"));
    }
    let mut left = shots;
    let mut mass = 1.0;
    let mut counts = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        let p = p.max(0.0);
        let n = if k + 1 == probs.len() || left == 0 {
            left
        } else if p >= mass {
            left
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(left, q).map_err(|e| Error::param("probabilities", e.to_string()))?.sample(rng)
        };
        counts.push(n);
        left -= n;
        mass -= p;
    }
    Ok(counts)
}

/// Seeded multinomial counts; the same seed always gives the same counts.
pub fn sample_shots(probs: &[f64], shots: u64, seed: u64) -> Result<Vec<u64>> {
    sample_with(probs, shots, &mut ChaCha20Rng::seed_from_u64(seed))
}

/// Generator for replication `index` of a study seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Names of the reporting chart.
pub fn chart_names(model: SystemModel) -> &'static [&'static str] {
    match model {
        SystemModel::Lambda3 => &["omega", "xi"],
        SystemModel::FourPod5 => &["omega", "xi", "phi"],
    }
}

/// Maps an angle to [0, π/2] without changing sin² or cos².
pub fn fold_quarter(angle: f64) -> f64 {
    let a = angle.rem_euclid(PI);
    if a > FRAC_PI_2 {
        PI - a
    } else {
        a
    }
}

pub fn search_to_chart(model: SystemModel, x: &[f64]) -> Vec<f64> {
    match model {
        SystemModel::Lambda3 => x.to_vec(),
        SystemModel::FourPod5 => vec![x[0], 0.5 * (x[1] + x[2]), 0.5 * (x[1] - x[2])],
    }
}

pub fn chart_to_search(model: SystemModel, l: &[f64]) -> Vec<f64> {
    match model {
        SystemModel::Lambda3 => l.to_vec(),
        SystemModel::FourPod5 => vec![l[0], l[1] + l[2], l[1] - l[2]],
    }
}

/// Chart values of the parameters as a single-time fit sees them: Ω, and
/// the phases folded into the search box.
pub fn identifiable_truth(ip: &InternalParams) -> Vec<f64> {
    match ip.model {
        SystemModel::Lambda3 => vec![ip.rabi(), fold_quarter(ip.phase + ip.direction())],
        SystemModel::FourPod5 => {
            let plus = fold_quarter(ip.phase + ip.direction());
            let minus = fold_quarter(ip.phase - ip.direction());
            search_to_chart(ip.model, &[ip.rabi(), plus, minus])
        }
    }
}

/// Readout probabilities at time `t` for chart values `l`.
pub fn readout_probabilities(model: SystemModel, t: f64, l: &[f64]) -> Vec<f64> {
    match model {
        SystemModel::Lambda3 => probabilities_lambda(l[0] * t, l[1]).to_vec(),
        SystemModel::FourPod5 => probabilities_fourpod(l[0] * t, l[1], l[2]).to_vec(),
    }
}

fn readout_model(model: SystemModel, t: f64) -> Box<dyn ProbabilityModel> {
    match model {
        SystemModel::Lambda3 => Box::new(LambdaReadout { time: t }),
        SystemModel::FourPod5 => Box::new(FourPodReadout { time: t }),
    }
}

/// Per-shot Fisher information summed over the readout times.
pub fn record_information(model: SystemModel, times: &[f64], l: &[f64]) -> Result<DMatrix<f64>> {
    let chart = ParamChart::new(chart_names(model), l)?;
    let p = l.len();
    let mut total = DMatrix::zeros(p, p);
    for &t in times {
        total += cfi_matrix(readout_model(model, t).as_ref(), &chart, DEFAULT_STEP)?.entries;
    }
    Ok(total)
}

fn weighted_log_likelihood(model: SystemModel, times: &[f64], weights: &[Vec<f64>], l: &[f64]) -> f64 {
    times
        .iter()
        .zip(weights)
        .map(|(&t, w)| {
            let p = readout_probabilities(model, t, l);
            w.iter().zip(&p).filter(|(n, _)| **n > 0.0).map(|(n, q)| n * q.max(LOG_FLOOR).ln()).sum::<f64>()
        })
        .sum()
}

/// Σ_t Σ_m n_m ln p_m(λ), with p floored at 10⁻³⁰.
pub fn log_likelihood(record: &MeasurementRecord, model: SystemModel, l: &[f64]) -> Result<f64> {
    if record.times.len() != record.counts.len() {
        return Err(Error::Contract("one count row per time required".into()));
    }
    if l.len() != chart_names(model).len() || record.counts.iter().any(|r| r.len() != model.spin_dim()) {
        return Err(Error::Contract(format!("record or parameters do not match {model:?}")));
    }
    Ok(weighted_log_likelihood(model, &record.times, &record.weights(), l))
}

/// Axis-aligned box in search coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SearchDomain {
    /// Quarter-period box for readouts no later than `t_max`.
    pub fn single_time(model: SystemModel, t_max: f64) -> Result<Self> {
        if !(t_max > 0.0) {
            return Err(Error::param("measurement_time", "must be positive"));
        }
        let omega_max = FRAC_PI_2 / (model.angle_factor() * t_max);
        let p = chart_names(model).len();
        let mut upper = vec![FRAC_PI_2; p];
        upper[0] = omega_max;
        Ok(Self { lower: vec![0.0; p], upper })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| (*lo..=*hi).contains(v))
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    fn grid_point(&self, index: usize) -> Vec<f64> {
        let mut rest = index;
        (0..self.lower.len())
            .map(|k| {
                let i = rest % GRID_POINTS;
                rest /= GRID_POINTS;
                self.lower[k] + (self.upper[k] - self.lower[k]) * i as f64 / (GRID_POINTS - 1) as f64
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateResult {
    pub chart: ParamChart,
    pub log_likelihood: f64,
    pub converged: bool,
    pub identifiable: bool,
    pub iterations: usize,
}

impl EstimateResult {
    pub fn ok(&self) -> bool {
        self.converged && self.identifiable
    }
}

/// Minimizes `f` over the box with a clamped Nelder–Mead simplex.
/// Returns (point, value, iterations, final diameter).
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], domain: &SearchDomain) -> (Vec<f64>, f64, usize, f64) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for k in 0..n {
        let mut v = start.to_vec();
        let h = 0.02 * (domain.upper[k] - domain.lower[k]);
        v[k] += if v[k] + h <= domain.upper[k] { h } else { -h };
        domain.clamp(&mut v);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let diameter = |s: &[Vec<f64>]| {
        s.iter()
            .flat_map(|a| s.iter().map(move |b| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)))
            .fold(0.0, f64::max)
    };
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS && diameter(&simplex) > SIMPLEX_TOL {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64).collect();
        let toward = |coef: f64| {
            let mut v: Vec<f64> = (0..n).map(|k| centroid[k] + coef * (simplex[n][k] - centroid[k])).collect();
            domain.clamp(&mut v);
            v
        };
        let reflected = toward(-1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = toward(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] { toward(-0.5) } else { toward(0.5) };
            let fc = f(&contracted);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let v: Vec<f64> = (0..n).map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k])).collect();
                    values[i] = f(&v);
                    simplex[i] = v;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).expect("non-empty simplex");
    (simplex[best].clone(), values[best], iterations, diameter(&simplex))
}

/// Fisher-scoring steps from `x`, kept only while they stay in the box and
/// do not lower the likelihood. Removes the √ε floor a value-only search
/// leaves near a smooth maximum.
fn polish(model: SystemModel, times: &[f64], weights: &[Vec<f64>], domain: &SearchDomain, x: Vec<f64>) -> Vec<f64> {
    let total: f64 = weights.iter().flatten().sum();
    let mut x = x;
    for _ in 0..8 {
        let l = search_to_chart(model, &x);
        let p = l.len();
        let mut score = DVector::zeros(p);
        for (&t, w) in times.iter().zip(weights) {
            let rm = readout_model(model, t);
            let probs = rm.probabilities(&l);
            let jac = rm.jacobian(&l).expect("readout models are analytic");
            for (n, &wn) in w.iter().enumerate() {
                if wn > 0.0 && probs[n] > 0.0 {
                    for i in 0..p {
                        score[i] += wn * jac[n][i] / probs[n];
                    }
                }
            }
        }
        let Ok(info) = record_information(model, times, &l) else { return x };
        let Some(inv) = (info * total).try_inverse() else { return x };
        let step_chart = inv * score;
        let next_chart: Vec<f64> = l.iter().zip(step_chart.iter()).map(|(a, b)| a + b).collect();
        let next = chart_to_search(model, &next_chart);
        if !domain.contains(&next) {
            return x;
        }
        let before = weighted_log_likelihood(model, times, weights, &l);
        let after = weighted_log_likelihood(model, times, weights, &next_chart);
        if after < before - 1e-12 * before.abs().max(1.0) {
            return x;
        }
        let size = step_chart.amax();
        x = next;
        if size < 1e-15 {
            break;
        }
    }
    x
}

fn fit(model: SystemModel, times: &[f64], weights: &[Vec<f64>], domain: &SearchDomain) -> Result<EstimateResult> {
    let p = chart_names(model).len();
    if domain.lower.len() != p || domain.upper.len() != p {
        return Err(Error::Contract(format!("search domain has the wrong dimension for {model:?}")));
    }
    let objective = |x: &[f64]| -weighted_log_likelihood(model, times, weights, &search_to_chart(model, x));
    let points = GRID_POINTS.pow(p as u32);
    let start = (0..points)
        .map(|i| {
            let x = domain.grid_point(i);
            let v = objective(&x);
            (x, v)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is not empty")
        .0;
    let (x, _, iterations, diam) = nelder_mead(&objective, &start, domain);
    let x = polish(model, times, weights, domain, x);
    let l = search_to_chart(model, &x);
    let identifiable = match record_information(model, times, &l) {
        Ok(info) => {
            let eig = info.symmetric_eigenvalues();
            let (lo, hi) = (eig.min(), eig.max());
            hi > 0.0 && lo > hi / MAX_CONDITION
        }
        Err(_) => false,
    };
    Ok(EstimateResult {
        chart: ParamChart::new(chart_names(model), &l)?,
        log_likelihood: weighted_log_likelihood(model, times, weights, &l),
        converged: diam < CONVERGED_DIAMETER,
        identifiable,
        iterations,
    })
}

/// Maximum-likelihood estimate: grid search over `domain` followed by a
/// simplex refinement.
pub fn mle(record: &MeasurementRecord, model: SystemModel, domain: &SearchDomain) -> Result<EstimateResult> {
    if record.times.len() != record.counts.len() || record.counts.iter().any(|r| r.len() != model.spin_dim()) {
        return Err(Error::Contract(format!("record does not match {model:?}")));
    }
    fit(model, &record.times, &record.weights(), domain)
}

/// Fit of exact expected frequencies, the infinite-shot limit.
pub fn mle_expected(model: SystemModel, times: &[f64], l: &[f64], domain: &SearchDomain) -> Result<EstimateResult> {
    let weights: Vec<Vec<f64>> = times.iter().map(|&t| readout_probabilities(model, t, l)).collect();
    fit(model, times, &weights, domain)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyReport {
    pub model: SystemModel,
    pub parameters: Vec<String>,
    /// Chart values the fits are compared against.
    pub truth: Vec<f64>,
    /// ms
    pub measurement_time: f64,
    /// Readout angle in units of π: √2Ωt (Λ) or 2Ωt (four-pod).
    pub readout_angle_pi: f64,
    pub shots: u64,
    pub replications: usize,
    pub seed: u64,
    pub successes: usize,
    pub failures: usize,
    pub mean: Option<Vec<f64>>,
    /// (mean − truth) in units of the empirical standard error.
    pub bias_in_standard_errors: Option<Vec<f64>>,
    pub empirical_covariance: Option<Vec<Vec<f64>>>,
    pub empirical_note: Option<String>,
    /// (νI)⁻¹ at the truth.
    pub crb: Vec<Vec<f64>>,
    pub crb_condition: f64,
    /// diag(Γ̂)/diag((νI)⁻¹)
    pub diagonal_ratio: Option<Vec<f64>>,
    /// Eigenvalues of Γ̂·νI.
    pub ratio_eigenvalues: Option<Vec<f64>>,
    /// |δξ̂ − δφ̂|/δξ̂, four-pod only.
    pub xi_phi_spread: Option<f64>,
}

impl StudyReport {
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.replications.max(1) as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// R independent single-time experiments of ν shots each, refit by
/// maximum likelihood. Replication r draws from substream r of `seed`.
pub fn study(ip: &InternalParams, time: f64, shots: u64, replications: usize, seed: u64) -> Result<StudyReport> {
    if shots == 0 || replications == 0 {
        return Err(Error::param("replications", "shots and replications must be positive"));
    }
    let model = ip.model;
    let domain = SearchDomain::single_time(model, time)?;
    let mut search_truth = chart_to_search(model, &identifiable_truth(ip));
    // a readout angle of exactly π/2 lands on the box edge up to round-off
    let slack: Vec<f64> = domain.lower.iter().zip(&domain.upper).map(|(lo, hi)| 1e-9 * (hi - lo)).collect();
    let outside = search_truth
        .iter()
        .zip(domain.lower.iter().zip(&domain.upper))
        .zip(&slack)
        .any(|((v, (lo, hi)), eps)| *v < lo - eps || *v > hi + eps);
    if outside {
        return Err(Error::param(
            "measurement_time",
            "the readout angle is past a quarter period; the truth lies outside the identifiable domain",
        ));
    }
    domain.clamp(&mut search_truth);
    let truth = search_to_chart(model, &search_truth);
    let probs = readout_probabilities(model, time, &truth);
    let info = record_information(model, &[time], &truth)?;
    let names = chart_names(model);
    let bound = crb(&crate::fisher::FisherMatrix::new(info.clone(), ParamChart::new(names, &truth)?, crate::FisherKind::Classical)?, shots)?;

    let fits: Vec<Result<EstimateResult>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            let counts = sample_with(&probs, shots, &mut rng)?;
            let record = MeasurementRecord { times: vec![time], counts: vec![counts], shots, seed };
            mle(&record, model, &domain)
        })
        .collect();
    let mut estimates = Vec::new();
    let mut failures = 0;
    for f in fits {
        match f? {
            e if e.ok() => estimates.push(e.chart.values),
            _ => failures += 1,
        }
    }

    let p = truth.len();
    let k = estimates.len();
    let mean = (k > 0).then(|| (0..p).map(|i| estimates.iter().map(|e| e[i]).sum::<f64>() / k as f64).collect::<Vec<_>>());
    let (cov, note) = if k >= 2 {
        let m = mean.as_ref().expect("k > 0");
        let cov = DMatrix::from_fn(p, p, |i, j| {
            estimates.iter().map(|e| (e[i] - m[i]) * (e[j] - m[j])).sum::<f64>() / (k - 1) as f64
        });
        (Some(cov), None)
    } else {
        (None, Some("insufficient replications".to_string()))
    };
    let bias = match (&mean, &cov) {
        (Some(m), Some(c)) => Some((0..p).map(|i| (m[i] - truth[i]) / (c[(i, i)] / k as f64).sqrt()).collect()),
        _ => None,
    };
    let diagonal_ratio = cov.as_ref().map(|c| (0..p).map(|i| c[(i, i)] / bound.covariance[(i, i)]).collect::<Vec<_>>());
    let ratio_eigenvalues = cov.as_ref().and_then(|c| {
        let chol = (&info * shots as f64).cholesky()?;
        let l = chol.l();
        let mut e: Vec<f64> = (l.transpose() * c * &l).symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        Some(e)
    });
    let xi_phi_spread = match (model, &cov) {
        (SystemModel::FourPod5, Some(c)) => {
            let (dxi, dphi) = (c[(1, 1)].sqrt(), c[(2, 2)].sqrt());
            Some((dxi - dphi).abs() / dxi)
        }
        _ => None,
    };

    Ok(StudyReport {
        model,
        parameters: names.iter().map(|s| s.to_string()).collect(),
        truth,
        measurement_time: time,
        readout_angle_pi: model.angle_factor() * ip.rabi() * time / PI,
        shots,
        replications,
        seed,
        successes: k,
        failures,
        mean,
        bias_in_standard_errors: bias,
        empirical_covariance: cov.as_ref().map(matrix_rows),
        empirical_note: note,
        crb: matrix_rows(&bound.covariance),
        crb_condition: bound.condition,
        diagonal_ratio,
        ratio_eigenvalues,
        xi_phi_spread,
    })
}

/// [`study`] at the protocol's measurement time.
pub fn covariance_study(p: &ProtocolParams, shots: u64, replications: usize, seed: u64) -> Result<StudyReport> {
    study(&p.internal()?, p.measurement_time()?, shots, replications, seed)
}
