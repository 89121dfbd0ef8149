//! Per-step records and their CSV form.
//!
//! Column order is fixed: `t`, then seven columns per device in declaration
//! order (`<id>.omega`, `<id>.p_inv`, `<id>.q_inv`, `<id>.p_set_star`,
//! `<id>.p_set_applied`, `<id>.dac`, `<id>.tripped`), then one
//! `island_f@<bus>` column per monitored bus, then `collapsed`.
//!
//! `dac` is `-1` (lower barrier), `0` (passthrough) or `1` (upper barrier).
//! Island frequency is `NaN` for a bus with no energized source.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dac::DacMode;
use crate::network::BusId;

pub const DEVICE_FIELDS: [&str; 7] = [
    "omega",
    "p_inv",
    "q_inv",
    "p_set_star",
    "p_set_applied",
    "dac",
    "tripped",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceSample {
    pub omega: f64,
    pub p_inv: f64,
    pub q_inv: f64,
    pub p_set_star: f64,
    pub p_set_applied: f64,
    pub dac: DacMode,
    pub tripped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub devices: Vec<DeviceSample>,
    pub bus_freq: Vec<f64>,
    pub collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub device_ids: Vec<String>,
    pub monitor_buses: Vec<BusId>,
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("malformed trace header: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
}

fn mode_from_code(code: i64) -> Option<DacMode> {
    match code {
        0 => Some(DacMode::Passthrough),
        -1 => Some(DacMode::LowBarrier),
        1 => Some(DacMode::HighBarrier),
        _ => None,
    }
}

impl Trace {
    pub fn new(device_ids: Vec<String>, monitor_buses: Vec<BusId>) -> Self {
        Self {
            device_ids,
            monitor_buses,
            records: Vec::new(),
        }
    }

    pub fn device_index(&self, id: &str) -> Option<usize> {
        self.device_ids.iter().position(|d| d == id)
    }

    pub fn bus_column(&self, bus: BusId) -> Option<usize> {
        self.monitor_buses.iter().position(|&b| b == bus)
    }

    /// Spacing between records, inferred from the first two.
    pub fn record_interval(&self) -> f64 {
        match self.records.as_slice() {
            [a, b, ..] => b.t - a.t,
            _ => 0.0,
        }
    }

    /// `(t, f)` samples of the island frequency seen at `bus`.
    pub fn bus_series(&self, bus: BusId) -> Option<Vec<(f64, f64)>> {
        let col = self.bus_column(bus)?;
        Some(self.records.iter().map(|r| (r.t, r.bus_freq[col])).collect())
    }

    pub fn device_series(&self, id: &str) -> Option<Vec<(f64, DeviceSample)>> {
        let idx = self.device_index(id)?;
        Some(self.records.iter().map(|r| (r.t, r.devices[idx])).collect())
    }

    pub fn header(&self) -> String {
        let mut h = String::from("t");
        for id in &self.device_ids {
            for f in DEVICE_FIELDS {
                let _ = write!(h, ",{id}.{f}");
            }
        }
        for b in &self.monitor_buses {
            let _ = write!(h, ",island_f@{b}");
        }
        h.push_str(",collapsed");
        h
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.header())?;
        let mut line = String::new();
        for r in &self.records {
            line.clear();
            let _ = write!(line, "{}", r.t);
            for d in &r.devices {
                let _ = write!(
                    line,
                    ",{},{},{},{},{},{},{}",
                    d.omega,
                    d.p_inv,
                    d.q_inv,
                    d.p_set_star,
                    d.p_set_applied,
                    d.dac.code(),
                    u8::from(d.tripped)
                );
            }
            for f in &r.bus_freq {
                let _ = write!(line, ",{f}");
            }
            let _ = write!(line, ",{}", u8::from(r.collapsed));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn from_csv(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| TraceError::Header("empty input".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"t") || cols.last() != Some(&"collapsed") {
            return Err(TraceError::Header("expected `t` first and `collapsed` last".into()));
        }
        let mut device_ids = Vec::new();
        let mut monitor_buses = Vec::new();
        let mut i = 1;
        while i < cols.len() - 1 {
            if let Some(bus) = cols[i].strip_prefix("island_f@") {
                let bus = bus
                    .parse()
                    .map_err(|_| TraceError::Header(format!("bad bus column `{}`", cols[i])))?;
                monitor_buses.push(bus);
                i += 1;
                continue;
            }
            let (id, field) = cols[i]
                .rsplit_once('.')
                .ok_or_else(|| TraceError::Header(format!("bad column `{}`", cols[i])))?;
            if field != DEVICE_FIELDS[0] || i + DEVICE_FIELDS.len() > cols.len() - 1 {
                return Err(TraceError::Header(format!("bad device block at `{}`", cols[i])));
            }
            device_ids.push(id.to_string());
            i += DEVICE_FIELDS.len();
        }

        let mut trace = Trace::new(device_ids, monitor_buses);
        for (n, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let row_err = |message: String| TraceError::Row {
                line: n + 2,
                message,
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(row_err(format!("expected {} fields, found {}", cols.len(), fields.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| row_err(format!("`{s}`: {e}")));
            let t = num(fields[0])?;
            let mut devices = Vec::with_capacity(trace.device_ids.len());
            for k in 0..trace.device_ids.len() {
                let b = 1 + k * DEVICE_FIELDS.len();
                let code: i64 = fields[b + 5]
                    .parse()
                    .map_err(|_| row_err(format!("bad dac code `{}`", fields[b + 5])))?;
                devices.push(DeviceSample {
                    omega: num(fields[b])?,
                    p_inv: num(fields[b + 1])?,
                    q_inv: num(fields[b + 2])?,
                    p_set_star: num(fields[b + 3])?,
                    p_set_applied: num(fields[b + 4])?,
                    dac: mode_from_code(code).ok_or_else(|| row_err(format!("bad dac code {code}")))?,
                    tripped: fields[b + 6] == "1",
                });
            }
            let fb = 1 + trace.device_ids.len() * DEVICE_FIELDS.len();
            let bus_freq = (0..trace.monitor_buses.len())
                .map(|k| num(fields[fb + k]))
                .collect::<Result<Vec<_>, _>>()?;
            trace.records.push(TraceRecord {
                t,
                devices,
                bus_freq,
                collapsed: fields[fields.len() - 1] == "1",
            });
        }
        Ok(trace)
    }
}
