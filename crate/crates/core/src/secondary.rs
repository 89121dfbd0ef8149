//! Slow set-point dispatcher and the set-point masking attack.
//!
//! The dispatcher is a leader-follower integral law: the leader turns the
//! island's frequency error into a power increment, splits it by rating, and
//! followers then average their per-unit set-points toward equal sharing.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondaryConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Tick period, s.
    #[serde(default = "default_period")]
    pub period: f64,
    /// Integral gain, pu per Hz per tick.
    #[serde(default = "default_ki")]
    pub k_i: f64,
    /// Averaging rounds per tick.
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    #[serde(default)]
    pub attack: Option<AttackSpec>,
}

fn default_period() -> f64 {
    2.0
}
fn default_ki() -> f64 {
    0.5
}
fn default_rounds() -> u32 {
    3
}

impl Default for SecondaryConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            period: default_period(),
            k_i: default_ki(),
            rounds: default_rounds(),
            attack: None,
        }
    }
}

/// Set-point masking attack: targeted inverters receive the values they had
/// just before the window opened, whatever the dispatcher sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub targets: Vec<String>,
    pub t_on: f64,
    pub t_off: f64,
}

impl AttackSpec {
    pub fn is_active(&self, t: f64) -> bool {
        self.t_on <= t && t < self.t_off
    }

    pub fn targets(&self, device: &str) -> bool {
        self.targets.iter().any(|d| d == device)
    }
}

// Weight each follower moves toward the rating-weighted mean per round.
const CONSENSUS_STEP: f64 = 0.5;

/// Rating-weighted increment step followed by averaging; see the module docs.
///
/// Returns the set-points before the final `[0, 1]` clamp and after it.
fn dispatch(
    f_island: f64,
    omega0: f64,
    cfg: &SecondaryConfig,
    ratings: &[f64],
    p_set_star: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let total: f64 = ratings.iter().sum();
    if ratings.is_empty() || total <= 0.0 {
        return (p_set_star.to_vec(), p_set_star.to_vec());
    }
    let delta = cfg.k_i * (omega0 - f_island);
    let mut p: Vec<f64> = p_set_star
        .iter()
        .zip(ratings)
        .map(|(p, s)| p + delta * s / total)
        .collect();
    for _ in 0..cfg.rounds {
        let mean = p.iter().zip(ratings).map(|(p, s)| p * s).sum::<f64>() / total;
        for v in &mut p {
            *v += CONSENSUS_STEP * (mean - *v);
        }
    }
    let clamped = p.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    (p, clamped)
}

/// One dispatcher tick for the controllable sources of an island.
pub fn secondary_update(
    f_island: f64,
    omega0: f64,
    cfg: &SecondaryConfig,
    ratings: &[f64],
    p_set_star: &[f64],
) -> Vec<f64> {
    dispatch(f_island, omega0, cfg, ratings, p_set_star).1
}

/// Replaces targeted entries with their snapshot while the window is open.
pub fn attack_filter(
    live: &[f64],
    devices: &[&str],
    attack: &AttackSpec,
    snapshot: &[f64],
    t: f64,
) -> Vec<f64> {
    if !attack.is_active(t) {
        return live.to_vec();
    }
    mask(live, devices, attack, snapshot)
}

pub(crate) fn mask(live: &[f64], devices: &[&str], attack: &AttackSpec, snapshot: &[f64]) -> Vec<f64> {
    live.iter()
        .zip(devices)
        .zip(snapshot)
        .map(|((&v, d), &s)| if attack.targets(d) { s } else { v })
        .collect()
}
