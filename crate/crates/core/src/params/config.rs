//! JSON config documents.
//!
//! Sections `ion`, `trap`, `drive`, `protocol` and `run`; every key is
//! optional unless noted, unknown keys are rejected. Frequencies (`trap.*`,
//! `drive.g`, `drive.omega`, `drive.delta`) are read in Hz under the default
//! `run.frequency_convention = "cyclic"` and in rad/s under `"angular"`.
//! Forces are in yoctonewtons, the phase ξ in units of π.
//!
//! ```json
//! {
//!   "drive": { "g": 4.0e3, "omega": 150.0e3, "delta": "auto" },
//!   "protocol": { "model": "lambda", "force_yn": -35.0, "xi_pi": 1.7 }
//! }
//! ```

use std::f64::consts::PI;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{FrequencyConvention, ProtocolParams};
use crate::error::{Error, Result};
use crate::hamiltonians::SystemModel;

/// ¹⁷¹Yb⁺ ion mass in atomic mass units (neutral atom minus one electron).
pub const DEFAULT_MASS_U: f64 = 170.935_777;
const DEFAULT_TRAP_HZ: f64 = 1.0e6;

pub const FIG2_EXAMPLE: &str = include_str!("../../configs/fig2.json");
pub const FIG4_EXAMPLE: &str = include_str!("../../configs/fig4.json");

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IonSection {
    pub label: String,
    pub mass_u: f64,
}

impl Default for IonSection {
    fn default() -> Self {
        Self { label: "171Yb+".into(), mass_u: DEFAULT_MASS_U }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrapSection {
    pub axial_freq: f64,
    pub transverse_freq: f64,
}

/// `"auto"` or a number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpinDetuningValue {
    Auto(AutoKeyword),
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoKeyword {
    #[serde(rename = "auto")]
    Auto,
}

impl Default for SpinDetuningValue {
    fn default() -> Self {
        SpinDetuningValue::Auto(AutoKeyword::Auto)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriveSection {
    /// required
    pub g: f64,
    /// required
    pub omega: f64,
    pub delta: SpinDetuningValue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Lambda,
    Fourpod,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolSection {
    /// required
    pub model: ModelName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub force_yn: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub force_x_yn: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub force_y_yn: Option<f64>,
    /// required
    pub xi_pi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSection {
    pub frequency_convention: FrequencyConvention,
    pub n_max: usize,
    pub shots: u64,
    pub replications: usize,
    pub seed: u64,
    pub rabi_angle_pi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurement_time_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            frequency_convention: FrequencyConvention::Cyclic,
            n_max: 15,
            shots: 10_000,
            replications: 200,
            seed: 2017,
            rabi_angle_pi: 0.5,
            measurement_time_ms: None,
            times: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigDocument {
    pub ion: IonSection,
    pub trap: TrapSection,
    pub drive: DriveSection,
    pub protocol: ProtocolSection,
    pub run: RunSection,
}

struct Section {
    name: &'static str,
    map: Map<String, Value>,
}

impl Section {
    fn from_root(root: &mut Map<String, Value>, name: &'static str) -> Result<Self> {
        let map = match root.remove(name) {
            None => Map::new(),
            Some(Value::Object(m)) => m,
            Some(_) => return Err(Error::config(name, "section must be an object")),
        };
        Ok(Self { name, map })
    }

    fn key(&self, key: &str) -> String {
        format!("{}.{}", self.name, key)
    }

    fn optional<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v).map(Some).map_err(|e| Error::config(self.key(key), e.to_string())),
        }
    }

    fn required<T: DeserializeOwned>(&mut self, key: &str) -> Result<T> {
        self.optional(key)?.ok_or_else(|| Error::config(self.key(key), "missing required key"))
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(Error::config(self.key(k), "unknown key")),
            None => Ok(()),
        }
    }
}

/// Parses and validates a JSON config document.
pub fn parse_config(document: &str) -> Result<ProtocolParams> {
    let value: Value = serde_json::from_str(document).map_err(|e| Error::config("<document>", e.to_string()))?;
    let Value::Object(mut root) = value else {
        return Err(Error::config("<document>", "top level must be an object"));
    };

    let mut run_s = Section::from_root(&mut root, "run")?;
    let d = RunSection::default();
    let run = RunSection {
        frequency_convention: run_s.optional("frequency_convention")?.unwrap_or(d.frequency_convention),
        n_max: run_s.optional("n_max")?.unwrap_or(d.n_max),
        shots: run_s.optional("shots")?.unwrap_or(d.shots),
        replications: run_s.optional("replications")?.unwrap_or(d.replications),
        seed: run_s.optional("seed")?.unwrap_or(d.seed),
        rabi_angle_pi: run_s.optional("rabi_angle_pi")?.unwrap_or(d.rabi_angle_pi),
        measurement_time_ms: run_s.optional("measurement_time_ms")?,
        times: run_s.optional("times")?,
    };
    run_s.finish()?;

    let mut ion_s = Section::from_root(&mut root, "ion")?;
    let di = IonSection::default();
    let ion = IonSection {
        label: ion_s.optional("label")?.unwrap_or(di.label),
        mass_u: ion_s.optional("mass_u")?.unwrap_or(di.mass_u),
    };
    ion_s.finish()?;

    let default_trap = match run.frequency_convention {
        FrequencyConvention::Cyclic => DEFAULT_TRAP_HZ,
        FrequencyConvention::Angular => 2.0 * PI * DEFAULT_TRAP_HZ,
    };
    let mut trap_s = Section::from_root(&mut root, "trap")?;
    let trap = TrapSection {
        axial_freq: trap_s.optional("axial_freq")?.unwrap_or(default_trap),
        transverse_freq: trap_s.optional("transverse_freq")?.unwrap_or(default_trap),
    };
    trap_s.finish()?;

    let mut drive_s = Section::from_root(&mut root, "drive")?;
    let drive = DriveSection {
        g: drive_s.required("g")?,
        omega: drive_s.required("omega")?,
        delta: drive_s.optional("delta")?.unwrap_or_default(),
    };
    drive_s.finish()?;

    let mut proto_s = Section::from_root(&mut root, "protocol")?;
    let protocol = ProtocolSection {
        model: proto_s.required("model")?,
        force_yn: proto_s.optional("force_yn")?,
        force_x_yn: proto_s.optional("force_x_yn")?,
        force_y_yn: proto_s.optional("force_y_yn")?,
        xi_pi: proto_s.required("xi_pi")?,
    };
    proto_s.finish()?;

    if let Some(k) = root.keys().next() {
        return Err(Error::config(k.as_str(), "unknown section"));
    }

    ProtocolParams::from_document(ConfigDocument { ion, trap, drive, protocol, run })
}

/// Serializes parameters back into a config document (pretty JSON).
pub fn serialize_config(p: &ProtocolParams) -> String {
    serde_json::to_string_pretty(p.document()).expect("config document is always serializable")
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite, got {v}")))
    }
}

/// Checks every range constraint and returns the model kind.
pub(crate) fn validate(doc: &ConfigDocument) -> Result<SystemModel> {
    positive("ion.mass_u", doc.ion.mass_u)?;
    positive("trap.axial_freq", doc.trap.axial_freq)?;
    positive("trap.transverse_freq", doc.trap.transverse_freq)?;
    positive("drive.omega", doc.drive.omega)?;
    finite("drive.g", doc.drive.g)?;
    if doc.drive.g < 0.0 {
        return Err(Error::config("drive.g", "coupling must be non-negative"));
    }
    if doc.drive.g >= doc.drive.omega {
        return Err(Error::config("drive.g", "weak coupling requires g < omega"));
    }
    if let SpinDetuningValue::Value(v) = doc.drive.delta {
        finite("drive.delta", v)?;
    }
    finite("protocol.xi_pi", doc.protocol.xi_pi)?;
    if !(0.0..2.0).contains(&doc.protocol.xi_pi) {
        return Err(Error::config("protocol.xi_pi", "phase must lie in [0, 2) (units of π)"));
    }

    let p = &doc.protocol;
    let model = match p.model {
        ModelName::Lambda => {
            let f = p.force_yn.ok_or_else(|| Error::config("protocol.force_yn", "missing required key"))?;
            finite("protocol.force_yn", f)?;
            if p.force_x_yn.is_some() || p.force_y_yn.is_some() {
                return Err(Error::config("protocol.force_x_yn", "transverse components are only valid for model \"fourpod\""));
            }
            SystemModel::Lambda3
        }
        ModelName::Fourpod => {
            let fx = p.force_x_yn.ok_or_else(|| Error::config("protocol.force_x_yn", "missing required key"))?;
            let fy = p.force_y_yn.ok_or_else(|| Error::config("protocol.force_y_yn", "missing required key"))?;
            finite("protocol.force_x_yn", fx)?;
            finite("protocol.force_y_yn", fy)?;
            if p.force_yn.is_some() {
                return Err(Error::config("protocol.force_yn", "axial force is only valid for model \"lambda\""));
            }
            SystemModel::FourPod5
        }
    };

    let r = &doc.run;
    if r.n_max < 1 {
        return Err(Error::config("run.n_max", "truncation must be at least 1"));
    }
    if r.shots < 1 {
        return Err(Error::config("run.shots", "need at least one shot"));
    }
    if r.replications < 1 {
        return Err(Error::config("run.replications", "need at least one replication"));
    }
    positive("run.rabi_angle_pi", r.rabi_angle_pi)?;
    if let Some(t) = r.measurement_time_ms {
        positive("run.measurement_time_ms", t)?;
    }
    if let Some(spec) = &r.times {
        parse_time_grid(spec).map_err(|e| Error::config("run.times", e.to_string()))?;
    }
    Ok(model)
}

/// Parses a `start:stop:count` grid (ms) into uniformly spaced times.
pub fn parse_time_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(Error::config("times", format!("expected start:stop:count, got {spec:?}")));
    };
    let start: f64 = start.trim().parse().map_err(|_| Error::config("times", format!("bad start {start:?}")))?;
    let stop: f64 = stop.trim().parse().map_err(|_| Error::config("times", format!("bad stop {stop:?}")))?;
    let count: usize = count.trim().parse().map_err(|_| Error::config("times", format!("bad count {count:?}")))?;
    if !(start.is_finite() && stop.is_finite()) || start < 0.0 || stop < start {
        return Err(Error::config("times", "need 0 <= start <= stop"));
    }
    if count == 0 {
        return Err(Error::config("times", "count must be positive"));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}
