//! Scalar summaries of a trace.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::trace::Trace;
use crate::network::BusId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Bus whose island frequency stands for the system frequency.
    pub monitor_bus: BusId,
    /// Frequency below which time counts as a violation, Hz.
    pub violation_hz: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    /// Slack on the band edges when counting occupancy, Hz.
    pub band_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub violation_time: f64,
    pub nadir: f64,
    pub peak: f64,
    pub safe_band_occupancy: f64,
    pub settled_frequency: f64,
    pub collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("trace has no records")]
    EmptyTrace,
    #[error("bus {0} is not monitored in this trace")]
    UnknownBus(BusId),
}

pub fn in_band(f: f64, th: &Thresholds) -> bool {
    f >= th.omega_min - th.band_tol && f <= th.omega_max + th.band_tol
}

/// Sums record intervals with island frequency below the violation threshold.
/// Records without an energized island are skipped for extrema and occupancy.
pub fn compute_metrics(trace: &Trace, th: &Thresholds) -> Result<Metrics, MetricsError> {
    let last = trace.records.last().ok_or(MetricsError::EmptyTrace)?;
    let col = trace
        .bus_column(th.monitor_bus)
        .ok_or(MetricsError::UnknownBus(th.monitor_bus))?;
    let dt = trace.record_interval();

    let mut below = 0usize;
    let mut nadir = f64::INFINITY;
    let mut peak = f64::NEG_INFINITY;
    let mut finite = 0usize;
    let mut inside = 0usize;
    for r in &trace.records {
        let f = r.bus_freq[col];
        if f < th.violation_hz {
            below += 1;
        }
        if f.is_finite() {
            finite += 1;
            nadir = nadir.min(f);
            peak = peak.max(f);
            if in_band(f, th) {
                inside += 1;
            }
        }
    }
    let occupancy = if finite == 0 {
        0.0
    } else {
        inside as f64 / finite as f64
    };
    Ok(Metrics {
        violation_time: below as f64 * dt,
        nadir: if finite == 0 { f64::NAN } else { nadir },
        peak: if finite == 0 { f64::NAN } else { peak },
        safe_band_occupancy: occupancy,
        settled_frequency: last.bus_freq[col],
        collapsed: trace.records.iter().any(|r| r.collapsed),
    })
}

/// Fraction of records in `[t0, t1)` whose frequency at `bus` is in band.
pub fn occupancy_between(trace: &Trace, th: &Thresholds, t0: f64, t1: f64) -> Option<f64> {
    let col = trace.bus_column(th.monitor_bus)?;
    let (n, inside) = trace
        .records
        .iter()
        .filter(|r| r.t >= t0 && r.t < t1)
        .fold((0usize, 0usize), |(n, k), r| {
            (n + 1, k + usize::from(in_band(r.bus_freq[col], th)))
        });
    (n > 0).then(|| inside as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dac::DacMode;
    use crate::engine::trace::{DeviceSample, TraceRecord};

    fn synthetic(freqs: impl Fn(f64) -> f64, n: usize, dt: f64) -> Trace {
        let mut tr = Trace::new(vec!["g".into()], vec![1]);
        for k in 0..n {
            let t = k as f64 * dt;
            tr.records.push(TraceRecord {
                t,
                devices: vec![DeviceSample {
                    omega: freqs(t),
                    p_inv: 0.0,
                    q_inv: 0.0,
                    p_set_star: 0.0,
                    p_set_applied: 0.0,
                    dac: DacMode::Passthrough,
                    tripped: false,
                }],
                bus_freq: vec![freqs(t)],
                collapsed: false,
            });
        }
        tr
    }

    fn th() -> Thresholds {
        Thresholds {
            monitor_bus: 1,
            violation_hz: 56.5,
            omega_min: 59.9,
            omega_max: 60.1,
            band_tol: 0.0,
        }
    }

    #[test]
    fn constant_nominal_trace() {
        let m = compute_metrics(&synthetic(|_| 60.0, 500, 0.01), &th()).unwrap();
        assert_eq!(m.violation_time, 0.0);
        assert_eq!(m.safe_band_occupancy, 1.0);
        assert_eq!(m.nadir, 60.0);
        assert_eq!(m.peak, 60.0);
        assert!(!m.collapsed);
    }

    #[test]
    fn half_second_below_threshold() {
        let dt = 0.001;
        let tr = synthetic(|t| if (1.0..1.5).contains(&t) { 56.4 } else { 60.0 }, 3000, dt);
        let m = compute_metrics(&tr, &th()).unwrap();
        assert!((m.violation_time - 0.5).abs() <= dt + 1e-12, "{}", m.violation_time);
        assert_eq!(m.nadir, 56.4);
        assert!(m.nadir <= m.peak);
    }

    #[test]
    fn errors() {
        let tr = Trace::new(vec![], vec![1]);
        assert_eq!(compute_metrics(&tr, &th()), Err(MetricsError::EmptyTrace));
        let tr = synthetic(|_| 60.0, 3, 0.01);
        let mut t = th();
        t.monitor_bus = 9;
        assert_eq!(compute_metrics(&tr, &t), Err(MetricsError::UnknownBus(9)));
    }

    #[test]
    fn windowed_occupancy() {
        let tr = synthetic(|t| if t < 1.0 { 60.3 } else { 60.0 }, 200, 0.01);
        assert_eq!(occupancy_between(&tr, &th(), 1.0, 2.0), Some(1.0));
        assert_eq!(occupancy_between(&tr, &th(), 0.0, 0.5), Some(0.0));
        assert_eq!(occupancy_between(&tr, &th(), 5.0, 6.0), None);
    }
}
