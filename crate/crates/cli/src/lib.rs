//! Command implementations behind the `ionmetro` binary.
//!
//! Every command writes its outputs into `--out`, then a manifest
//! `<command>.manifest.json` listing them. Exit codes: 0 success, 1 I/O or
//! internal failure, 2 config error, 3 singular information matrix, 4 more
//! than 10% of the estimation replications failed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ionmetro::analytic::{FourPodReadout, LambdaReadout};
use ionmetro::dynamics::{analytic_trajectory, max_abs_deviation, protocol_times, run_protocol, ProbabilityTrajectory};
use ionmetro::estimation::covariance_study;
use ionmetro::fisher::{
    cfi_matrix, crb, matrix_rows, qfi_pure, reparameterize, weak_commutativity, FisherMatrix, ProbabilityModel,
    StateModel, DEFAULT_STEP,
};
use ionmetro::params::{parse_config, serialize_config, FIG2_EXAMPLE, FIG4_EXAMPLE, YOCTONEWTON};
use ionmetro::{Error, ParamChart, ProtocolParams, SystemModel};

/// Largest tolerated share of failed replications.
pub const MAX_FAILURE_RATE: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(name = "ionmetro", version, about = "Force sensing with a trapped ion: simulation, Fisher analysis, estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Λ protocol trajectories, numeric vs closed form
    Fig2(CommonArgs),
    /// Four-pod protocol trajectories, numeric vs closed form
    Fig4(CommonArgs),
    /// Classical and quantum Fisher information at the readout time
    Fisher(FisherArgs),
    /// Monte-Carlo maximum-likelihood covariance study
    Estimate(EstimateArgs),
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// JSON config; defaults to the bundled example for the command
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub nmax: Option<usize>,
    /// "start:stop:count" in ms
    #[arg(long)]
    pub times: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChartName {
    /// (Ω, ξ) or (Ω, ξ, φ)
    Rabi,
    /// (F, ξ) or (F_⊥, ξ, φ), force in yN
    Force,
}

#[derive(Debug, Args, Clone)]
pub struct FisherArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value = "rabi")]
    pub chart: ChartName,
    /// Repetitions ν used for the bounds
    #[arg(long)]
    pub shots: Option<u64>,
}

#[derive(Debug, Args, Clone)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{failures} of {replications} replications failed (limit {:.0}%)", MAX_FAILURE_RATE * 100.0)]
    EstimationFailures { failures: usize, replications: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::Config { .. } | Error::InvalidParameter { .. }) | CliError::Usage(_) => 2,
            CliError::Core(Error::Singular { .. }) => 3,
            CliError::Core(Error::Estimation(_)) | CliError::EstimationFailures { .. } => 4,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub duration_s: f64,
}

/// Result of a successful command.
#[derive(Debug)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}

fn load(common: &CommonArgs, fallback: &str) -> CliResult<ProtocolParams> {
    let text = match &common.config {
        Some(path) => fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?,
        None => fallback.to_string(),
    };
    let p = parse_config(&text)?;
    Ok(p.with_document(|d| {
        if let Some(s) = common.seed {
            d.run.seed = s;
        }
        if let Some(n) = common.nmax {
            d.run.n_max = n;
        }
        if let Some(t) = &common.times {
            d.run.times = Some(t.clone());
        }
    })?)
}

fn finish(command: &str, p: &ProtocolParams, out: &Path, outputs: Vec<PathBuf>, start: Instant) -> CliResult<Outcome> {
    let manifest = RunManifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: p.run().seed,
        config: serde_json::from_str(&serialize_config(p)).expect("config serializes to JSON"),
        outputs: outputs.clone(),
        duration_s: start.elapsed().as_secs_f64(),
    };
    let path = out.join(format!("{command}.manifest.json"));
    write_file(&path, &serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    Ok(Outcome { outputs, manifest: path })
}

fn prepare_out(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.to_path_buf(), source })
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn label(m: i32) -> String {
    if m < 0 {
        format!("p_minus{}", -m)
    } else {
        format!("p_{m}")
    }
}

/// One row per time: t, numeric columns, closed-form columns; then a
/// `max_abs_deviation` row.
pub fn trajectory_csv(numeric: &ProbabilityTrajectory, analytic: &ProbabilityTrajectory, deviation: f64) -> String {
    let labels = numeric.model.labels();
    let mut s = String::from("t");
    for suffix in ["numeric", "analytic"] {
        for &m in labels {
            write!(s, ",{}_{suffix}", label(m)).unwrap();
        }
    }
    s.push('\n');
    for (k, t) in numeric.times.iter().enumerate() {
        s.push_str(&num(*t));
        for row in [&numeric.probabilities[k], &analytic.probabilities[k]] {
            for p in row {
                write!(s, ",{}", num(*p)).unwrap();
            }
        }
        s.push('\n');
    }
    write!(s, "max_abs_deviation,{}", num(deviation)).unwrap();
    s.push_str(&",".repeat(2 * labels.len() - 1));
    s.push('\n');
    s
}

fn cmd_trajectory(command: &str, want: SystemModel, fallback: &str, args: &CommonArgs) -> CliResult<Outcome> {
    let start = Instant::now();
    let p = load(args, fallback)?;
    if p.model != want {
        return Err(Error::config("protocol.model", format!("`{command}` needs the {want:?} model")).into());
    }
    let times = protocol_times(&p)?;
    let numeric = run_protocol(&p, &times)?;
    let analytic = analytic_trajectory(&p.internal()?, &times)?;
    let dev = max_abs_deviation(&numeric, &analytic)?;
    log::info!("{command}: max |Δp| = {dev:.3e} over {} times", times.len());
    prepare_out(&args.out)?;
    let csv = args.out.join(format!("{command}.csv"));
    write_file(&csv, &trajectory_csv(&numeric, &analytic, dev))?;
    finish(command, &p, &args.out, vec![csv], start)
}

#[derive(Debug, Serialize)]
struct ChartReport {
    names: Vec<String>,
    values: Vec<f64>,
    cfi: Vec<Vec<f64>>,
    qfi: Vec<Vec<f64>>,
    /// √diag((νH)⁻¹)
    bound_std: Vec<f64>,
    bound_condition: f64,
}

#[derive(Debug, Serialize)]
struct FourPodConstants {
    /// H_ΩΩ/t², measured
    qfi_omega_over_t2: f64,
    /// H_ξξ/sin²(2Ωt), measured
    qfi_xi_over_sin2: f64,
    /// H_φφ/sin²(2Ωt), measured
    qfi_phi_over_sin2: f64,
    /// Reference constants diag(4t², sin², sin²) the measured ones are compared with.
    reference: [f64; 3],
    discrepancy_factor: f64,
}

#[derive(Debug, Serialize)]
struct FisherReport {
    model: SystemModel,
    measurement_time: f64,
    readout_angle_pi: f64,
    shots: u64,
    primary_chart: String,
    weak_commutativity: Vec<Vec<f64>>,
    cfi_minus_qfi_max: f64,
    qfi_off_diagonal_max: f64,
    /// Closed-form QFI for Λ: diag(8t², 4sin²(√2Ωt)).
    lambda_closed_form_deviation: Option<f64>,
    fourpod_constants: Option<FourPodConstants>,
    /// |δξ − δφ| for the four-pod bounds.
    xi_phi_bound_difference: Option<f64>,
    rabi_chart: ChartReport,
    force_chart: ChartReport,
    notes: Vec<String>,
}

fn chart_report(i: &FisherMatrix, h: &FisherMatrix, shots: u64) -> CliResult<ChartReport> {
    let bound = crb(h, shots)?;
    Ok(ChartReport {
        names: h.chart.names.clone(),
        values: h.chart.values.clone(),
        cfi: i.rows(),
        qfi: h.rows(),
        bound_std: bound.std_devs(),
        bound_condition: bound.condition,
    })
}

fn cmd_fisher(args: &FisherArgs) -> CliResult<Outcome> {
    let start = Instant::now();
    let p = load(&args.common, FIG2_EXAMPLE)?;
    let ip = p.internal()?;
    let t = p.measurement_time()?;
    let shots = args.shots.unwrap_or(p.run().shots);
    if shots == 0 {
        return Err(CliError::Usage("--shots must be positive".into()));
    }
    let rabi = ip.rabi();
    let (chart, prob, state): (ParamChart, Box<dyn ProbabilityModel>, Box<dyn StateModel>) = match ip.model {
        SystemModel::Lambda3 => (
            ParamChart::new(&["omega", "xi"], &[rabi, ip.phase + ip.direction()])?,
            Box::new(LambdaReadout { time: t }),
            Box::new(LambdaReadout { time: t }),
        ),
        SystemModel::FourPod5 => (
            ParamChart::new(&["omega", "xi", "phi"], &[rabi, ip.phase, ip.direction()])?,
            Box::new(FourPodReadout { time: t }),
            Box::new(FourPodReadout { time: t }),
        ),
    };
    let i = cfi_matrix(prob.as_ref(), &chart, DEFAULT_STEP)?;
    let h = qfi_pure(state.as_ref(), &chart, DEFAULT_STEP)?;
    let w = weak_commutativity(state.as_ref(), &chart, DEFAULT_STEP)?;

    // Ω = k·|F| with k in (rad/ms)/yN
    let k = ip.rabi_per_newton() * YOCTONEWTON;
    let pdim = chart.len();
    let mut jac = nalgebra::DMatrix::identity(pdim, pdim);
    jac[(0, 0)] = k;
    let mut force_names: Vec<&str> = chart.names.iter().map(String::as_str).collect();
    force_names[0] = "force_yn";
    let mut force_values = chart.values.clone();
    force_values[0] = rabi / k;
    let force_chart = ParamChart::new(&force_names, &force_values)?;
    let i_f = reparameterize(&i, &jac, force_chart.clone())?;
    let h_f = reparameterize(&h, &jac, force_chart)?;

    let angle = ip.angle_rate() * t;
    let sin2 = angle.sin().powi(2);
    let mut notes = Vec::new();
    let (lambda_dev, constants, xi_phi) = match ip.model {
        SystemModel::Lambda3 => {
            let want = [8.0 * t * t, 4.0 * sin2];
            let dev = (0..2).map(|n| (h.get(n, n) - want[n]).abs() / want[n].max(1e-300)).fold(0.0, f64::max);
            (Some(dev), None, None)
        }
        SystemModel::FourPod5 => {
            let c = FourPodConstants {
                qfi_omega_over_t2: h.get(0, 0) / (t * t),
                qfi_xi_over_sin2: h.get(1, 1) / sin2,
                qfi_phi_over_sin2: h.get(2, 2) / sin2,
                reference: [4.0, 1.0, 1.0],
                discrepancy_factor: h.get(0, 0) / (4.0 * t * t),
            };
            notes.push(format!(
                "measured QFI constants differ from the reference diag(4t², sin², sin²) by a common factor {:.12}",
                c.discrepancy_factor
            ));
            notes.push(
                "the transverse force bound uses the transverse ground-state spread r0; the reference expression writes the axial z0"
                    .into(),
            );
            let b = crb(&h, shots)?.std_devs();
            (None, Some(c), Some((b[1] - b[2]).abs()))
        }
    };

    let rabi_chart = chart_report(&i, &h, shots)?;
    let force_chart = chart_report(&i_f, &h_f, shots)?;
    let report = FisherReport {
        model: ip.model,
        measurement_time: t,
        readout_angle_pi: angle / std::f64::consts::PI,
        shots,
        primary_chart: match args.chart {
            ChartName::Rabi => "rabi".into(),
            ChartName::Force => "force".into(),
        },
        weak_commutativity: matrix_rows(&w),
        cfi_minus_qfi_max: (&i.entries - &h.entries).amax(),
        qfi_off_diagonal_max: h.max_off_diagonal(),
        lambda_closed_form_deviation: lambda_dev,
        fourpod_constants: constants,
        xi_phi_bound_difference: xi_phi,
        rabi_chart,
        force_chart,
        notes,
    };
    prepare_out(&args.common.out)?;
    let path = args.common.out.join("fisher.json");
    write_file(&path, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    finish("fisher", &p, &args.common.out, vec![path], start)
}

fn cmd_estimate(args: &EstimateArgs) -> CliResult<Outcome> {
    let start = Instant::now();
    let p = load(&args.common, FIG2_EXAMPLE)?.with_document(|d| {
        if let Some(s) = args.shots {
            d.run.shots = s;
        }
        if let Some(r) = args.replications {
            d.run.replications = r;
        }
    })?;
    let run = p.run();
    let report = covariance_study(&p, run.shots, run.replications, run.seed)?;
    prepare_out(&args.common.out)?;
    let path = args.common.out.join("estimate.json");
    write_file(&path, &report.to_json())?;
    let outcome = finish("estimate", &p, &args.common.out, vec![path], start)?;
    if report.failure_rate() > MAX_FAILURE_RATE {
        return Err(CliError::EstimationFailures { failures: report.failures, replications: report.replications });
    }
    Ok(outcome)
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    match &cli.command {
        Command::Fig2(a) => cmd_trajectory("fig2", SystemModel::Lambda3, FIG2_EXAMPLE, a),
        Command::Fig4(a) => cmd_trajectory("fig4", SystemModel::FourPod5, FIG4_EXAMPLE, a),
        Command::Fisher(a) => cmd_fisher(a),
        Command::Estimate(a) => cmd_estimate(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(o) => {
            for f in &o.outputs {
                println!("{}", f.display());
            }
            println!("{}", o.manifest.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
