//! Scenario documents: JSON schema, validation and the bundled cases.
//!
//! Powers are per-unit: device set-points on the device rating, loads and
//! line susceptances on `network.base_kva`. Frequencies are in Hz.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::engine::metrics::Thresholds;
use crate::engine::{EventKind, SimConfig, Event};
use crate::model::{
    DacConfig, DgParams, InverterParams, DEFAULT_GFL_DWELL_S, DEFAULT_GFL_TRIP_HZ,
};
use crate::network::{BusId, BusLoad, DeviceRole, Line, NetworkModel, Placement};
use crate::secondary::SecondaryConfig;

/// Smallest frequency change a meter is assumed to resolve, Hz.
pub const FREQUENCY_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub name: String,
    pub sim: SimConfig,
    pub network: NetworkDoc,
    pub devices: Vec<DeviceDoc>,
    #[serde(default)]
    pub dac: DacConfig,
    #[serde(default)]
    pub secondary: SecondaryConfig,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default)]
    pub metrics: MetricsDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub base_kva: f64,
    pub buses: Vec<BusId>,
    #[serde(default)]
    pub lines: Vec<Line>,
    #[serde(default)]
    pub loads: Vec<LoadDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadDoc {
    pub bus: BusId,
    pub p: f64,
    #[serde(default)]
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviceDoc {
    Gfm(GfmDoc),
    Dg(DgDoc),
    Gfl(GflDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GfmDoc {
    pub id: String,
    pub bus: BusId,
    pub s_inv: f64,
    pub m_p: f64,
    pub tau: f64,
    #[serde(default)]
    pub p_min: f64,
    #[serde(default = "one")]
    pub p_max: f64,
    #[serde(default = "sixty")]
    pub omega0: f64,
    /// Initial dispatched set-point, pu.
    pub p_set: f64,
    /// Prescribed reactive loading, pu.
    #[serde(default)]
    pub q_inv: f64,
    #[serde(default)]
    pub tau_filter: Option<f64>,
    #[serde(default)]
    pub storage: bool,
    /// Overrides `dac.p_set_min` for this inverter.
    #[serde(default)]
    pub p_set_min: Option<f64>,
    #[serde(default)]
    pub omega_init: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgDoc {
    pub id: String,
    pub bus: BusId,
    pub rating: f64,
    pub droop: f64,
    pub tau: f64,
    #[serde(default = "sixty")]
    pub omega0: f64,
    pub p_set: f64,
    #[serde(default)]
    pub p_min: f64,
    #[serde(default = "one")]
    pub p_max: f64,
    #[serde(default)]
    pub governor_lag: f64,
    #[serde(default)]
    pub omega_init: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GflDoc {
    pub id: String,
    pub bus: BusId,
    pub rating: f64,
    pub p_out: f64,
    #[serde(default = "gfl_trip")]
    pub f_trip: f64,
    #[serde(default = "gfl_dwell")]
    pub t_dwell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsDoc {
    /// Bus standing for the system frequency; defaults to the first bus.
    #[serde(default)]
    pub monitor_bus: Option<BusId>,
    /// Buses traced with an island-frequency column; defaults to all.
    #[serde(default)]
    pub trace_buses: Option<Vec<BusId>>,
    #[serde(default = "gfl_trip")]
    pub violation_hz: f64,
    #[serde(default = "band_tol")]
    pub band_tol: f64,
}

impl Default for MetricsDoc {
    fn default() -> Self {
        Self {
            monitor_bus: None,
            trace_buses: None,
            violation_hz: gfl_trip(),
            band_tol: band_tol(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn sixty() -> f64 {
    60.0
}
fn gfl_trip() -> f64 {
    DEFAULT_GFL_TRIP_HZ
}
fn gfl_dwell() -> f64 {
    DEFAULT_GFL_DWELL_S
}
fn band_tol() -> f64 {
    FREQUENCY_RESOLUTION
}

impl DeviceDoc {
    pub fn id(&self) -> &str {
        match self {
            DeviceDoc::Gfm(d) => &d.id,
            DeviceDoc::Dg(d) => &d.id,
            DeviceDoc::Gfl(d) => &d.id,
        }
    }

    pub fn bus(&self) -> BusId {
        match self {
            DeviceDoc::Gfm(d) => d.bus,
            DeviceDoc::Dg(d) => d.bus,
            DeviceDoc::Gfl(d) => d.bus,
        }
    }

    /// kVA.
    pub fn rating(&self) -> f64 {
        match self {
            DeviceDoc::Gfm(d) => d.s_inv,
            DeviceDoc::Dg(d) => d.rating,
            DeviceDoc::Gfl(d) => d.rating,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DeviceDoc::Gfm(_) => "gfm",
            DeviceDoc::Dg(_) => "dg",
            DeviceDoc::Gfl(_) => "gfl",
        }
    }
}

impl GfmDoc {
    pub fn params(&self) -> InverterParams {
        InverterParams {
            s_inv: self.s_inv,
            m_p: self.m_p,
            tau: self.tau,
            p_min: self.p_min,
            p_max: self.p_max,
            omega0: self.omega0,
            storage: self.storage,
            tau_filter: self.tau_filter,
        }
    }
}

impl DgDoc {
    pub fn params(&self) -> DgParams {
        DgParams {
            rating: self.rating,
            droop: self.droop,
            tau: self.tau,
            omega0: self.omega0,
            p_min: self.p_min,
            p_max: self.p_max,
            governor_lag: self.governor_lag,
        }
    }
}

/// One problem found in a document, located by a JSON path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationErrors(pub Vec<Issue>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation error(s)", self.0.len())?;
        for issue in &self.0 {
            write!(f, "\n  {issue}")?;
        }
        Ok(())
    }
}

impl ValidationErrors {
    pub fn issues(&self) -> &[Issue] {
        &self.0
    }
}

/// A document plus any non-fatal findings.
#[derive(Debug, Clone)]
pub struct Validated {
    pub doc: ScenarioDoc,
    pub warnings: Vec<String>,
}

/// Parses JSON text and validates it, reporting every problem found.
pub fn parse_and_validate(text: &str) -> Result<Validated, ValidationErrors> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ValidationErrors(vec![Issue {
            path: if path == "." { "$".into() } else { format!("$.{path}") },
            message: e.into_inner().to_string(),
        }])
    })?;
    let warnings = doc.validate()?;
    Ok(Validated { doc, warnings })
}

struct Collector(Vec<Issue>);

impl Collector {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Issue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, path: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.push(path, message);
        }
    }
}

impl ScenarioDoc {
    /// All cross-reference and range checks. Returns warnings on success.
    pub fn validate(&self) -> Result<Vec<String>, ValidationErrors> {
        let mut c = Collector(Vec::new());
        let mut warnings = Vec::new();

        let s = &self.sim;
        c.check(s.t_end > 0.0 && s.t_end.is_finite(), "$.sim.t_end", "must be positive");
        c.check(s.dt > 0.0 && s.dt <= 0.01, "$.sim.dt", "must lie in (0, 0.01] s");
        c.check(s.output_stride >= 1, "$.sim.output_stride", "must be at least 1");
        c.check(s.source_trip_hz.is_finite(), "$.sim.source_trip_hz", "must be finite");

        let net = &self.network;
        c.check(net.base_kva > 0.0, "$.network.base_kva", "must be positive");
        let buses: BTreeSet<BusId> = net.buses.iter().copied().collect();
        c.check(buses.len() == net.buses.len(), "$.network.buses", "bus ids must be unique");
        c.check(!net.buses.is_empty(), "$.network.buses", "at least one bus is required");
        let mut line_ids = BTreeSet::new();
        for (i, l) in net.lines.iter().enumerate() {
            let p = format!("$.network.lines[{i}]");
            c.check(line_ids.insert(l.id.as_str()), format!("{p}.id"), format!("duplicate line id `{}`", l.id));
            c.check(buses.contains(&l.from), format!("{p}.from"), format!("unknown bus {}", l.from));
            c.check(buses.contains(&l.to), format!("{p}.to"), format!("unknown bus {}", l.to));
            c.check(l.b > 0.0, format!("{p}.b"), "susceptance must be positive");
        }
        for (i, l) in net.loads.iter().enumerate() {
            let p = format!("$.network.loads[{i}]");
            c.check(buses.contains(&l.bus), format!("{p}.bus"), format!("unknown bus {}", l.bus));
            c.check(l.p.is_finite() && l.q.is_finite(), p, "load must be finite");
        }

        let mut ids = BTreeSet::new();
        let mut source_buses = BTreeMap::new();
        let mut gfm_omega0 = Vec::new();
        for (i, dev) in self.devices.iter().enumerate() {
            let p = format!("$.devices[{i}]");
            c.check(ids.insert(dev.id()), format!("{p}.id"), format!("duplicate device id `{}`", dev.id()));
            c.check(buses.contains(&dev.bus()), format!("{p}.bus"), format!("unknown bus {}", dev.bus()));
            if !matches!(dev, DeviceDoc::Gfl(_)) {
                if let Some(other) = source_buses.insert(dev.bus(), dev.id()) {
                    c.push(
                        format!("{p}.bus"),
                        format!("bus {} already hosts frequency source `{other}`", dev.bus()),
                    );
                }
            }
            match dev {
                DeviceDoc::Gfm(g) => {
                    if let Err(e) = g.params().validate() {
                        c.push(p.clone(), e.to_string());
                    }
                    c.check(g.q_inv.abs() <= 1.0, format!("{p}.q_inv"), "reactive loading exceeds the rating");
                    c.check(g.p_set.is_finite(), format!("{p}.p_set"), "must be finite");
                    if let Some(tf) = g.tau_filter {
                        c.check(tf > 0.0, format!("{p}.tau_filter"), "must be positive");
                    }
                    gfm_omega0.push((i, g.omega0));
                }
                DeviceDoc::Dg(g) => {
                    if let Err(e) = g.params().validate() {
                        c.push(p.clone(), e.to_string());
                    }
                    c.check(g.p_set.is_finite(), format!("{p}.p_set"), "must be finite");
                }
                DeviceDoc::Gfl(g) => {
                    c.check(g.rating > 0.0, format!("{p}.rating"), "rating must be positive");
                    c.check((0.0..=1.0).contains(&g.p_out), format!("{p}.p_out"), "must lie in [0, 1] pu");
                    c.check(g.t_dwell > 0.0, format!("{p}.t_dwell"), "must be positive");
                }
            }
        }

        for (i, omega0) in &gfm_omega0 {
            if let Err(e) = self.dac.validate(*omega0) {
                c.push("$.dac", format!("{e} (device {i})"));
            }
        }
        if self.dac.half_width_response() < FREQUENCY_RESOLUTION {
            warnings.push(format!(
                "dac: alpha·(half band)^q = {:.3e} Hz is below the {FREQUENCY_RESOLUTION} Hz resolution; corrections will be imperceptible",
                self.dac.half_width_response()
            ));
        }

        let sec = &self.secondary;
        c.check(sec.period > 0.0, "$.secondary.period", "must be positive");
        c.check(sec.k_i > 0.0, "$.secondary.k_i", "must be positive");
        if let Some(a) = &sec.attack {
            c.check(a.t_on < a.t_off, "$.secondary.attack", "t_on must precede t_off");
            c.check(!a.targets.is_empty(), "$.secondary.attack.targets", "at least one target is required");
            for (k, t) in a.targets.iter().enumerate() {
                let ok = self
                    .devices
                    .iter()
                    .any(|d| matches!(d, DeviceDoc::Gfm(g) if &g.id == t));
                c.check(ok, format!("$.secondary.attack.targets[{k}]"), format!("`{t}` is not a grid-forming inverter"));
            }
        }

        for (i, ev) in self.events.iter().enumerate() {
            let p = format!("$.events[{i}]");
            c.check(
                ev.at >= 0.0 && ev.at <= s.t_end,
                format!("{p}.at"),
                "must lie within [0, t_end]",
            );
            match &ev.kind {
                EventKind::BreakerOpen { line } | EventKind::BreakerClose { line } => {
                    c.check(line_ids.contains(line.as_str()), format!("{p}.line"), format!("unknown line `{line}`"));
                }
                EventKind::LoadStep { bus, dp, dq } => {
                    c.check(buses.contains(bus), format!("{p}.bus"), format!("unknown bus {bus}"));
                    c.check(dp.is_finite() && dq.is_finite(), p, "step must be finite");
                }
                EventKind::DgRedispatch { device, p_set } => {
                    let ok = self
                        .devices
                        .iter()
                        .any(|d| matches!(d, DeviceDoc::Dg(g) if &g.id == device));
                    c.check(ok, format!("{p}.device"), format!("`{device}` is not a generator"));
                    c.check(p_set.is_finite(), format!("{p}.p_set"), "must be finite");
                }
                EventKind::AttackStart | EventKind::AttackEnd => {
                    c.push(format!("{p}.kind"), "attack windows are declared under secondary.attack");
                }
            }
        }

        let m = &self.metrics;
        if let Some(b) = m.monitor_bus {
            c.check(buses.contains(&b), "$.metrics.monitor_bus", format!("unknown bus {b}"));
        }
        if let Some(tb) = &m.trace_buses {
            for (k, b) in tb.iter().enumerate() {
                c.check(buses.contains(b), format!("$.metrics.trace_buses[{k}]"), format!("unknown bus {b}"));
            }
            if let Some(b) = m.monitor_bus {
                c.check(tb.contains(&b), "$.metrics.trace_buses", "must include the monitor bus");
            }
        }
        c.check(m.band_tol >= 0.0, "$.metrics.band_tol", "must be non-negative");

        if c.0.is_empty() {
            Ok(warnings)
        } else {
            Err(ValidationErrors(c.0))
        }
    }

    pub fn network_model(&self) -> NetworkModel {
        let mut loads: BTreeMap<BusId, BusLoad> = BTreeMap::new();
        for l in &self.network.loads {
            let e = loads.entry(l.bus).or_default();
            e.p += l.p;
            e.q += l.q;
        }
        NetworkModel {
            base_kva: self.network.base_kva,
            buses: self.network.buses.clone(),
            lines: self.network.lines.clone(),
            placements: self
                .devices
                .iter()
                .map(|d| Placement {
                    device: d.id().to_string(),
                    bus: d.bus(),
                    role: match d {
                        DeviceDoc::Gfl(_) => DeviceRole::Injection,
                        _ => DeviceRole::Source,
                    },
                    rating: d.rating(),
                })
                .collect(),
            loads,
        }
    }

    pub fn monitor_bus(&self) -> BusId {
        self.metrics
            .monitor_bus
            .unwrap_or_else(|| self.network.buses[0])
    }

    pub fn monitor_buses(&self) -> Vec<BusId> {
        self.metrics
            .trace_buses
            .clone()
            .unwrap_or_else(|| self.network.buses.clone())
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            monitor_bus: self.monitor_bus(),
            violation_hz: self.metrics.violation_hz,
            omega_min: self.dac.omega_min,
            omega_max: self.dac.omega_max,
            band_tol: self.metrics.band_tol,
        }
    }

    pub fn device(&self, id: &str) -> Option<&DeviceDoc> {
        self.devices.iter().find(|d| d.id() == id)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter path `{0}` must look like `<device>.<field>` or `<section>.<field>`")]
    Malformed(String),
    #[error("no device or section named `{0}`")]
    UnknownTarget(String),
    #[error("`{0}` is not a numeric field")]
    NotNumeric(String),
    #[error("value for `{path}` rejected: {message}")]
    Rejected { path: String, message: String },
}

const SECTIONS: [&str; 4] = ["sim", "dac", "secondary", "metrics"];

/// Sets a numeric field addressed as `<device id>.<field>` or
/// `<section>.<field>` (sections: `sim`, `dac`, `secondary`, `metrics`).
pub fn set_param(doc: &ScenarioDoc, path: &str, value: f64) -> Result<ScenarioDoc, ParamError> {
    let (target, field) = path
        .split_once('.')
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| ParamError::Malformed(path.to_string()))?;
    let mut tree = serde_json::to_value(doc).expect("scenario serializes");
    let node = if SECTIONS.contains(&target) {
        tree.get_mut(target)
    } else {
        let idx = doc
            .devices
            .iter()
            .position(|d| d.id() == target)
            .ok_or_else(|| ParamError::UnknownTarget(target.to_string()))?;
        tree.get_mut("devices").and_then(|d| d.get_mut(idx))
    }
    .ok_or_else(|| ParamError::UnknownTarget(target.to_string()))?;
    let obj = node
        .as_object_mut()
        .ok_or_else(|| ParamError::UnknownTarget(target.to_string()))?;
    match obj.get(field) {
        Some(Value::Number(_)) | Some(Value::Null) => {}
        _ => return Err(ParamError::NotNumeric(path.to_string())),
    }
    let number = serde_json::Number::from_f64(value).ok_or_else(|| ParamError::Rejected {
        path: path.to_string(),
        message: "value must be finite".into(),
    })?;
    obj.insert(field.to_string(), Value::Number(number));
    serde_json::from_value(tree).map_err(|e| ParamError::Rejected {
        path: path.to_string(),
        message: e.to_string(),
    })
}

/// Bundled scenario documents by name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "a" | "A" | "transient_band" => Some(include_str!("../../scenarios/transient_band.json")),
        "b" | "B" | "large_disturbance" => Some(include_str!("../../scenarios/large_disturbance.json")),
        "c" | "C" | "setpoint_attack" => Some(include_str!("../../scenarios/setpoint_attack.json")),
        _ => None,
    }
}

pub const BUNDLED: [&str; 3] = ["transient_band", "large_disturbance", "setpoint_attack"];

/// Parses a bundled scenario; panics only if the shipped file is broken.
pub fn load_bundled(name: &str) -> Option<ScenarioDoc> {
    bundled(name).map(|text| {
        parse_and_validate(text)
            .unwrap_or_else(|e| panic!("bundled scenario `{name}` is invalid: {e}"))
            .doc
    })
}
