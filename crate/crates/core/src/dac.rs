//! Decentralized autonomous safety controller.
//!
//! Sits between the secondary dispatcher and an inverter's droop loop. From
//! local measurements only it checks the frequency against a safe band and,
//! when the band is violated, replaces the dispatched set-point with the
//! smallest change that makes the barrier condition
//!
//! ```text
//! dB_min/dt ≥ −α B_min^q        dB_max/dt ≤ −α B_max^q
//! ```
//!
//! hold under the droop dynamics. The result is finally held inside the
//! inverter's apparent-power headroom. Every function here is pure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DacConfig, InverterParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DacError {
    #[error("infeasible operating point: |q_inv| = {q_inv} exceeds the inverter rating")]
    InfeasibleOperatingPoint { q_inv: f64 },
}

/// Local measurements plus the dispatched set-point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DacInputs {
    pub omega: f64,
    pub p_inv: f64,
    pub q_inv: f64,
    pub p_set_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DacMode {
    Passthrough,
    LowBarrier,
    HighBarrier,
}

impl DacMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DacMode::Passthrough => "passthrough",
            DacMode::LowBarrier => "low",
            DacMode::HighBarrier => "high",
        }
    }

    pub fn code(self) -> i8 {
        match self {
            DacMode::Passthrough => 0,
            DacMode::LowBarrier => -1,
            DacMode::HighBarrier => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DacDecision {
    /// Final set-point handed to the droop loop.
    pub p_set: f64,
    pub p_set_low: f64,
    pub p_set_up: f64,
    pub active: DacMode,
    /// The capacity clamp moved the value.
    pub clamped: bool,
    /// Lower bound above upper bound; never expected for odd `q`.
    pub inverted_bounds: bool,
}

/// Lower and upper barrier values. Safe iff `b_min ≥ 0` and `b_max ≤ 0`.
pub fn barrier_eval(omega: f64, cfg: &DacConfig) -> (f64, f64) {
    (omega - cfg.omega_min, omega - cfg.omega_max)
}

pub fn is_safe(omega: f64, cfg: &DacConfig) -> bool {
    let (b_min, b_max) = barrier_eval(omega, cfg);
    b_min >= 0.0 && b_max <= 0.0
}

fn boundary_setpoint(omega: f64, p_inv: f64, inv: &InverterParams, alpha: f64, q: u32, edge: f64) -> f64 {
    p_inv + (omega - inv.omega0 - alpha * (omega - edge).powi(q as i32)) / inv.m_p
}

/// Set-point that drives the droop loop onto the lower band edge.
pub fn p_set_low(omega: f64, p_inv: f64, inv: &InverterParams, cfg: &DacConfig) -> f64 {
    boundary_setpoint(omega, p_inv, inv, cfg.alpha, cfg.q, cfg.omega_min)
}

/// Set-point that drives the droop loop onto the upper band edge.
pub fn p_set_up(omega: f64, p_inv: f64, inv: &InverterParams, cfg: &DacConfig) -> f64 {
    boundary_setpoint(omega, p_inv, inv, cfg.alpha, cfg.q, cfg.omega_max)
}

/// Selection between the dispatched set-point and the barrier bounds.
///
/// In band (edges included) the dispatched value is returned bit-for-bit.
/// Outside it the result is `min(p_up, max(p_low, p_set_star))`. The third
/// element flags inverted bounds, in which case the bound of the violated side
/// is returned.
pub fn dac_select(
    p_set_star: f64,
    p_low: f64,
    p_up: f64,
    omega: f64,
    cfg: &DacConfig,
) -> (f64, DacMode, bool) {
    if cfg.omega_min <= omega && omega <= cfg.omega_max {
        return (p_set_star, DacMode::Passthrough, false);
    }
    let mode = if omega < cfg.omega_min {
        DacMode::LowBarrier
    } else {
        DacMode::HighBarrier
    };
    if p_low > p_up {
        let bound = match mode {
            DacMode::LowBarrier => p_low,
            _ => p_up,
        };
        return (bound, mode, true);
    }
    (p_up.min(p_low.max(p_set_star)), mode, false)
}

/// Holds the set-point inside `[p_set_min, sqrt(1 − q_inv²)]`.
pub fn capacity_clamp(
    p_set: f64,
    q_inv: f64,
    _inv: &InverterParams,
    cfg: &DacConfig,
) -> Result<(f64, bool), DacError> {
    if !(q_inv.abs() <= 1.0) {
        return Err(DacError::InfeasibleOperatingPoint { q_inv });
    }
    let p_max = (1.0 - q_inv * q_inv).sqrt();
    let out = p_max.min(cfg.p_set_min.max(p_set));
    Ok((out, out != p_set))
}

/// Full controller: barrier check, bounds, selection, capacity clamp.
///
/// With the controller disabled the dispatched value only goes through the
/// capacity clamp.
pub fn dac_compute(
    inputs: &DacInputs,
    inv: &InverterParams,
    cfg: &DacConfig,
) -> Result<DacDecision, DacError> {
    let DacInputs {
        omega,
        p_inv,
        q_inv,
        p_set_star,
    } = *inputs;

    if !cfg.enabled {
        let (p_set, clamped) = capacity_clamp(p_set_star, q_inv, inv, cfg)?;
        return Ok(DacDecision {
            p_set,
            p_set_low: p_set_star,
            p_set_up: p_set_star,
            active: DacMode::Passthrough,
            clamped,
            inverted_bounds: false,
        });
    }

    let low = p_set_low(omega, p_inv, inv, cfg);
    let up = p_set_up(omega, p_inv, inv, cfg);
    let (selected, active, inverted_bounds) = dac_select(p_set_star, low, up, omega, cfg);
    let (p_set, clamped) = capacity_clamp(selected, q_inv, inv, cfg)?;
    Ok(DacDecision {
        p_set,
        p_set_low: low,
        p_set_up: up,
        active,
        clamped,
        inverted_bounds,
    })
}
