//! Physical parameters and the single conversion layer between SI inputs and
//! the internal unit system (ħ = 1, time in ms, angular frequency in rad/ms).

mod config;

pub use config::{
    parse_config, parse_time_grid, serialize_config, ConfigDocument, DriveSection, IonSection, ProtocolSection,
    RunSection, SpinDetuningValue, TrapSection, FIG2_EXAMPLE, FIG4_EXAMPLE,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::SystemModel;

/// Reduced Planck constant, J·s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Unified atomic mass unit, kg (CODATA 2018).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// One yoctonewton in newtons.
pub const YOCTONEWTON: f64 = 1e-24;
/// Seconds per internal time unit.
pub const TIME_UNIT: f64 = 1e-3;

/// Converts an angular frequency in rad/s to internal rad/ms.
pub fn to_internal_rate(rad_per_s: f64) -> f64 {
    rad_per_s * TIME_UNIT
}

/// Converts an internal rate (rad/ms) back to rad/s.
pub fn from_internal_rate(rad_per_ms: f64) -> f64 {
    rad_per_ms / TIME_UNIT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    pub label: String,
    /// kg
    pub mass: f64,
}

impl IonSpecies {
    pub fn new(label: impl Into<String>, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::param("mass", format!("must be positive, got {mass}")));
        }
        Ok(Self { label: label.into(), mass })
    }

    /// ¹⁷¹Yb⁺, the default probe ion.
    pub fn ytterbium_171() -> Self {
        Self { label: "171Yb+".into(), mass: config::DEFAULT_MASS_U * ATOMIC_MASS_UNIT }
    }
}

/// Trap frequencies in rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapConfig {
    pub axial_freq: f64,
    pub transverse_freq: f64,
}

/// How frequency values in a config document are to be read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyConvention {
    /// Values are in Hz and get multiplied by 2π.
    #[default]
    Cyclic,
    /// Values are already in rad/s.
    Angular,
}

impl FrequencyConvention {
    pub fn to_angular(self, value: f64) -> f64 {
        match self {
            FrequencyConvention::Cyclic => 2.0 * PI * value,
            FrequencyConvention::Angular => value,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpinDetuning {
    /// Resolve to the value that cancels the vacuum AC Stark shifts.
    Auto,
    /// Explicit angular frequency, rad/s.
    Value(f64),
}

/// The external force, SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Force {
    /// Along the trap axis (Λ protocol), newtons, signed.
    Axial { force: f64 },
    /// In the transverse plane (four-pod protocol), newtons.
    Transverse { fx: f64, fy: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveParams {
    /// Spin-phonon coupling g, rad/s.
    pub coupling: f64,
    /// Phonon detuning ω, rad/s.
    pub detuning: f64,
    pub spin_detuning: SpinDetuning,
    pub force: Force,
    /// Force phase ξ in [0, 2π).
    pub phase: f64,
}

/// Simulation and estimation settings that are not physics.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSettings {
    pub n_max: usize,
    pub shots: u64,
    pub replications: usize,
    pub seed: u64,
    /// Readout time expressed as the effective pulse angle (√2Ωt for Λ,
    /// 2Ωt for four-pod), in units of π.
    pub rabi_angle_pi: f64,
    /// Explicit readout time in ms; overrides `rabi_angle_pi`.
    pub measurement_time: Option<f64>,
    /// `start:stop:count` trajectory grid in ms.
    pub times: Option<String>,
}

/// Fully validated parameters of one protocol run.
///
/// The config document is kept verbatim as the single source of truth, so
/// serialize/parse is an exact round trip; the typed views below perform
/// the unit conversion to SI on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolParams {
    document: ConfigDocument,
    pub model: SystemModel,
}

/// Derived quantities in internal units.
#[derive(Clone, Debug, PartialEq)]
pub struct InternalParams {
    pub model: SystemModel,
    /// Phonon detuning ω, rad/ms.
    pub omega: f64,
    /// g, rad/ms.
    pub coupling: f64,
    /// Δ after resolving `auto`, rad/ms.
    pub spin_detuning: f64,
    /// Force drive rate Fz₀/2ħ per driven mode (x, y), rad/ms. The Λ model
    /// uses only the first entry.
    pub force_rate: [f64; 2],
    /// Force phase ξ, rad.
    pub phase: f64,
    /// Ground-state spread of the driven mode(s), m.
    pub spread: f64,
}

impl InternalParams {
    /// Dimensionless displacement coefficients β = Fz₀/2ħω per mode.
    pub fn beta(&self) -> [f64; 2] {
        [self.force_rate[0] / self.omega, self.force_rate[1] / self.omega]
    }

    /// Direction of the force: atan2(F_y, F_x). For the Λ model this is 0 or
    /// π depending on the sign of the axial force.
    pub fn direction(&self) -> f64 {
        self.force_rate[1].atan2(self.force_rate[0])
    }

    /// Effective Rabi frequency Ω ≥ 0, rad/ms (g·|β| summed in quadrature).
    pub fn rabi(&self) -> f64 {
        let [bx, by] = self.beta();
        self.coupling * bx.hypot(by)
    }

    /// |F| (Λ) or |F_⊥| (four-pod), newtons.
    pub fn force_magnitude(&self) -> f64 {
        let rate = self.force_rate[0].hypot(self.force_rate[1]);
        from_internal_rate(rate) * 2.0 * HBAR / self.spread
    }

    /// Spin detuning that cancels the vacuum level shifts of the elimination.
    pub fn compensating_detuning(&self) -> f64 {
        -(self.model.stark_multiplicity() as f64) * self.coupling * self.coupling / self.omega
    }

    /// Δ minus its compensating value; zero when Δ = `auto`.
    pub fn residual_detuning(&self) -> f64 {
        self.spin_detuning - self.compensating_detuning()
    }

    /// ∂Ω/∂|F| in (rad/ms)/N.
    pub fn rabi_per_newton(&self) -> f64 {
        to_internal_rate(self.spread / (2.0 * HBAR)) * self.coupling / self.omega
    }

    /// Effective pulse angle per unit time: √2Ω for Λ, 2Ω for four-pod.
    pub fn angle_rate(&self) -> f64 {
        self.model.angle_factor() * self.rabi()
    }

    /// Time over which the readout populations go through one full cycle.
    pub fn population_period(&self) -> f64 {
        PI / self.angle_rate()
    }
}

/// Ground-state wave-function spread √(ħ/2Mω), in metres.
pub fn ground_state_spread(species: &IonSpecies, freq: f64) -> Result<f64> {
    if !(species.mass > 0.0) {
        return Err(Error::Domain(format!("mass must be positive, got {}", species.mass)));
    }
    if !(freq > 0.0) {
        return Err(Error::Domain(format!("trap frequency must be positive, got {freq}")));
    }
    Ok((HBAR / (2.0 * species.mass * freq)).sqrt())
}

/// Resolves SI parameters into internal units.
pub fn derive_internal(p: &ProtocolParams) -> Result<InternalParams> {
    let (ion, trap, drive) = (p.ion(), p.trap(), p.drive());
    let omega = to_internal_rate(drive.detuning);
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::param("omega", "phonon detuning must be positive"));
    }
    let coupling = to_internal_rate(drive.coupling);
    let (spread, force_rate) = match (p.model, drive.force) {
        (SystemModel::Lambda3, Force::Axial { force }) => {
            let z0 = ground_state_spread(&ion, trap.axial_freq)?;
            (z0, [to_internal_rate(force * z0 / (2.0 * HBAR)), 0.0])
        }
        (SystemModel::FourPod5, Force::Transverse { fx, fy }) => {
            let r0 = ground_state_spread(&ion, trap.transverse_freq)?;
            let k = r0 / (2.0 * HBAR);
            (r0, [to_internal_rate(fx * k), to_internal_rate(fy * k)])
        }
        (model, _) => {
            return Err(Error::Contract(format!("force entry does not match model {model:?}")))
        }
    };
    let mut ip = InternalParams {
        model: p.model,
        omega,
        coupling,
        spin_detuning: 0.0,
        force_rate,
        phase: drive.phase,
        spread,
    };
    ip.spin_detuning = match drive.spin_detuning {
        SpinDetuning::Auto => ip.compensating_detuning(),
        SpinDetuning::Value(v) => to_internal_rate(v),
    };
    Ok(ip)
}

impl ProtocolParams {
    /// Validates a document and wraps it.
    pub fn from_document(document: ConfigDocument) -> Result<Self> {
        let model = config::validate(&document)?;
        Ok(Self { document, model })
    }

    pub fn document(&self) -> &ConfigDocument {
        &self.document
    }

    /// Applies `edit` to a copy of the document and re-validates.
    pub fn with_document(&self, edit: impl FnOnce(&mut ConfigDocument)) -> Result<Self> {
        let mut doc = self.document.clone();
        edit(&mut doc);
        Self::from_document(doc)
    }

    pub fn convention(&self) -> FrequencyConvention {
        self.document.run.frequency_convention
    }

    pub fn ion(&self) -> IonSpecies {
        IonSpecies {
            label: self.document.ion.label.clone(),
            mass: self.document.ion.mass_u * ATOMIC_MASS_UNIT,
        }
    }

    pub fn trap(&self) -> TrapConfig {
        let c = self.convention();
        TrapConfig {
            axial_freq: c.to_angular(self.document.trap.axial_freq),
            transverse_freq: c.to_angular(self.document.trap.transverse_freq),
        }
    }

    pub fn drive(&self) -> DriveParams {
        let c = self.convention();
        let d = &self.document.drive;
        let pr = &self.document.protocol;
        let force = match self.model {
            SystemModel::Lambda3 => Force::Axial { force: pr.force_yn.unwrap_or(0.0) * YOCTONEWTON },
            SystemModel::FourPod5 => Force::Transverse {
                fx: pr.force_x_yn.unwrap_or(0.0) * YOCTONEWTON,
                fy: pr.force_y_yn.unwrap_or(0.0) * YOCTONEWTON,
            },
        };
        DriveParams {
            coupling: c.to_angular(d.g),
            detuning: c.to_angular(d.omega),
            spin_detuning: match d.delta {
                SpinDetuningValue::Auto(_) => SpinDetuning::Auto,
                SpinDetuningValue::Value(v) => SpinDetuning::Value(c.to_angular(v)),
            },
            force,
            phase: (pr.xi_pi * PI).rem_euclid(2.0 * PI),
        }
    }

    pub fn run(&self) -> RunSettings {
        let r = &self.document.run;
        RunSettings {
            n_max: r.n_max,
            shots: r.shots,
            replications: r.replications,
            seed: r.seed,
            rabi_angle_pi: r.rabi_angle_pi,
            measurement_time: r.measurement_time_ms,
            times: r.times.clone(),
        }
    }

    pub fn internal(&self) -> Result<InternalParams> {
        derive_internal(self)
    }

    /// Readout time in ms resolved from the run settings.
    pub fn measurement_time(&self) -> Result<f64> {
        let run = self.run();
        if let Some(t) = run.measurement_time {
            return Ok(t);
        }
        let ip = self.internal()?;
        let rate = ip.angle_rate();
        if rate == 0.0 {
            return Err(Error::param("rabi_angle_pi", "effective Rabi frequency is zero"));
        }
        Ok(run.rabi_angle_pi * PI / rate)
    }
}
