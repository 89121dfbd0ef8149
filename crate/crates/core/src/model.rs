//! Device models: grid-forming inverter droop dynamics, a diesel-generator
//! droop surrogate, and grid-following injections with an under-frequency
//! ride-through relay.
//!
//! Units are fixed across the crate: frequencies in Hz, angles in radians,
//! powers in per-unit on the device's own rating, droop gains in Hz per pu.
//! Angles advance as `d_delta = 2π (ω − ω0)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: &'static str, message: String },
}

fn param_err(field: &'static str, message: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        field,
        message: message.into(),
    }
}

/// Static parameters of a grid-forming inverter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverterParams {
    /// Apparent-power rating, kVA.
    pub s_inv: f64,
    /// P-f droop gain, Hz per pu.
    pub m_p: f64,
    /// Droop filter time constant, s.
    pub tau: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Nominal frequency, Hz.
    pub omega0: f64,
    /// Negative `p_min` is only accepted for storage-backed inverters.
    #[serde(default)]
    pub storage: bool,
    /// Optional first-order filter on the measured real power. `None` bypasses it.
    #[serde(default)]
    pub tau_filter: Option<f64>,
}

impl InverterParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.s_inv > 0.0) {
            return Err(param_err("s_inv", "rating must be positive"));
        }
        if !(self.tau > 0.0) {
            return Err(param_err("tau", "time constant must be positive"));
        }
        if !(self.m_p > 0.0) {
            return Err(param_err("m_p", "droop gain must be positive"));
        }
        if !(self.omega0 > 0.0) {
            return Err(param_err("omega0", "nominal frequency must be positive"));
        }
        if !(self.p_min <= self.p_max) {
            return Err(param_err("p_min", "p_min must not exceed p_max"));
        }
        if self.p_min < 0.0 && !self.storage {
            return Err(param_err(
                "p_min",
                "negative p_min requires a storage-capable inverter",
            ));
        }
        if let Some(tf) = self.tau_filter {
            if !(tf > 0.0) {
                return Err(param_err("tau_filter", "filter time constant must be positive"));
            }
        }
        Ok(())
    }
}

/// Safety-controller settings for one inverter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DacConfig {
    pub enabled: bool,
    pub omega_min: f64,
    pub omega_max: f64,
    /// Performance gain of the barrier condition.
    pub alpha: f64,
    /// Odd exponent of the barrier condition.
    pub q: u32,
    /// Lower dispatch floor applied by the capacity clamp, pu.
    #[serde(default)]
    pub p_set_min: f64,
}

impl Default for DacConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            omega_min: 59.9,
            omega_max: 60.1,
            alpha: 1.0,
            q: 3,
            p_set_min: 0.0,
        }
    }
}

impl DacConfig {
    /// Checks the band against the inverter's nominal frequency and the exponent.
    pub fn validate(&self, omega0: f64) -> Result<(), ModelError> {
        if self.q == 0 || self.q % 2 == 0 {
            return Err(param_err(
                "q",
                format!(
                    "exponent must be an odd positive integer to preserve the sign of the barrier condition (got {})",
                    self.q
                ),
            ));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(param_err("alpha", "performance gain must be positive and finite"));
        }
        if !(self.omega_min < self.omega_max) {
            return Err(param_err("omega_min", "omega_min must be below omega_max"));
        }
        if !(self.omega_min < omega0 && omega0 < self.omega_max) {
            return Err(param_err(
                "omega_min",
                format!(
                    "safe band [{}, {}] must strictly contain the nominal frequency {}",
                    self.omega_min, self.omega_max, omega0
                ),
            ));
        }
        if !self.p_set_min.is_finite() {
            return Err(param_err("p_set_min", "dispatch floor must be finite"));
        }
        Ok(())
    }

    /// Correction produced at the band edge for a violation of one half-width.
    /// Below a meter's resolution the controller cannot distinguish it from noise.
    pub fn half_width_response(&self) -> f64 {
        let half = 0.5 * (self.omega_max - self.omega_min);
        self.alpha * half.powi(self.q as i32)
    }
}

/// Continuous and measured state of a grid-forming inverter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GfmState {
    pub delta: f64,
    pub omega: f64,
    pub p_inv: f64,
    pub q_inv: f64,
    pub p_set_star: f64,
    pub p_set_applied: f64,
    /// Filtered real-power measurement; tracks `p_inv` when the filter is bypassed.
    pub p_meas: f64,
}

/// Droop dynamics of a grid-forming inverter.
///
/// Returns `(d_delta, d_omega)` in rad/s and Hz/s.
pub fn gfm_derivatives(
    state: &GfmState,
    params: &InverterParams,
    p_set: f64,
    p_inv: f64,
) -> (f64, f64) {
    let dev = state.omega - params.omega0;
    let d_delta = TAU * dev;
    let d_omega = (-dev + params.m_p * (p_set - p_inv)) / params.tau;
    (d_delta, d_omega)
}

/// Effective set-point after the inverter honours its real-power rating.
///
/// The droop command `p_set − (ω − ω0)/m_p` is held inside `[p_min, p_max]`;
/// inside the limits the set-point is returned unchanged.
pub fn rating_limited_setpoint(
    p_set: f64,
    omega: f64,
    omega0: f64,
    droop: f64,
    p_min: f64,
    p_max: f64,
) -> f64 {
    let shift = (omega - omega0) / droop;
    let command = p_set - shift;
    if command > p_max {
        p_max + shift
    } else if command < p_min {
        p_min + shift
    } else {
        p_set
    }
}

/// Diesel generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgParams {
    /// kVA.
    pub rating: f64,
    /// Hz per pu.
    pub droop: f64,
    /// Governor/droop time constant, s.
    pub tau: f64,
    pub omega0: f64,
    #[serde(default)]
    pub p_min: f64,
    #[serde(default = "one")]
    pub p_max: f64,
    /// Lag between the droop command and delivered mechanical power, s.
    /// Zero reduces the model to the plain droop equation.
    #[serde(default)]
    pub governor_lag: f64,
}

fn one() -> f64 {
    1.0
}

impl DgParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.rating > 0.0) {
            return Err(param_err("rating", "rating must be positive"));
        }
        if !(self.droop > 0.0) {
            return Err(param_err("droop", "droop gain must be positive"));
        }
        if !(self.tau > 0.0) {
            return Err(param_err("tau", "time constant must be positive"));
        }
        if !(self.omega0 > 0.0) {
            return Err(param_err("omega0", "nominal frequency must be positive"));
        }
        if !(self.p_min <= self.p_max) {
            return Err(param_err("p_min", "p_min must not exceed p_max"));
        }
        if !(self.governor_lag >= 0.0) {
            return Err(param_err("governor_lag", "lag must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DgState {
    pub delta: f64,
    pub omega: f64,
    /// Delivered mechanical power, only integrated when the governor lag is non-zero.
    pub p_mech: f64,
    pub p_inj: f64,
}

/// Droop dynamics of a diesel generator; same form as the inverter droop.
pub fn dg_derivatives(state: &DgState, params: &DgParams, p_set: f64, p_inj: f64) -> (f64, f64) {
    let dev = state.omega - params.omega0;
    let d_delta = TAU * dev;
    let d_omega = (-dev + params.droop * (p_set - p_inj)) / params.tau;
    (d_delta, d_omega)
}

/// Generator dynamics with a first-order governor lag.
///
/// Returns `(d_delta, d_omega, d_p_mech)`. The droop command is limited to the
/// rating before entering the lag.
pub fn dg_governed_derivatives(
    state: &DgState,
    params: &DgParams,
    p_set: f64,
    p_inj: f64,
) -> (f64, f64, f64) {
    let dev = state.omega - params.omega0;
    let command = (p_set - dev / params.droop).clamp(params.p_min, params.p_max);
    let d_delta = TAU * dev;
    let d_omega = params.droop * (state.p_mech - p_inj) / params.tau;
    let d_p_mech = (command - state.p_mech) / params.governor_lag;
    (d_delta, d_omega, d_p_mech)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripCause {
    UnderFrequency,
    /// The inverter's island lost every frequency source.
    Deenergized,
}

/// Grid-following inverter with an under-frequency ride-through relay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GflState {
    /// kVA.
    pub rating: f64,
    pub p_out: f64,
    pub frt_dwell: f64,
    pub tripped: bool,
    pub f_trip: f64,
    pub t_dwell: f64,
    #[serde(default)]
    pub cause: Option<TripCause>,
}

pub const DEFAULT_GFL_TRIP_HZ: f64 = 56.5;
pub const DEFAULT_GFL_DWELL_S: f64 = 0.160;

// Dwell is a float sum of step sizes; this absorbs its rounding.
const DWELL_EPS: f64 = 1e-9;

impl GflState {
    pub fn new(rating: f64, p_out: f64) -> Self {
        Self {
            rating,
            p_out,
            frt_dwell: 0.0,
            tripped: false,
            f_trip: DEFAULT_GFL_TRIP_HZ,
            t_dwell: DEFAULT_GFL_DWELL_S,
            cause: None,
        }
    }

    /// Real-power contribution, pu on own rating.
    pub fn injection(&self) -> f64 {
        if self.tripped {
            0.0
        } else {
            self.p_out
        }
    }

    pub fn trip(&mut self, cause: TripCause) {
        if !self.tripped {
            self.tripped = true;
            self.cause = Some(cause);
            self.p_out = 0.0;
        }
    }
}

/// Advances the ride-through relay by one step at local frequency `f_local`.
///
/// Dwell counts consecutive time below the threshold and resets on recovery.
/// Tripping latches for the rest of the run.
pub fn gfl_frt_step(state: &GflState, f_local: f64, dt: f64) -> Result<GflState, ModelError> {
    if !(dt > 0.0) {
        return Err(ModelError::InvalidArgument(format!(
            "step size must be positive (got {dt})"
        )));
    }
    let mut next = state.clone();
    if next.tripped {
        return Ok(next);
    }
    if f_local < next.f_trip {
        next.frt_dwell += dt;
    } else {
        next.frt_dwell = 0.0;
    }
    if next.frt_dwell >= next.t_dwell - DWELL_EPS {
        next.trip(TripCause::UnderFrequency);
    }
    Ok(next)
}
