//! Fixed-step hybrid simulation of one scenario.
//!
//! Each step runs, in order: due events, the secondary tick and attack
//! filter, the pre-step DAC evaluation (also what the trace records),
//! continuous integration, then collapse detection and the grid-following
//! relays. Events are snapped to the nearest step boundary.

pub mod integrator;
pub mod metrics;
pub mod sweep;
pub mod trace;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dac::{dac_compute, DacDecision, DacError, DacInputs, DacMode};
use crate::model::{
    dg_derivatives, dg_governed_derivatives, gfl_frt_step, gfm_derivatives,
    rating_limited_setpoint, DacConfig, DgParams, DgState, GflState, GfmState, InverterParams,
    ModelError, TripCause,
};
use crate::network::{
    apply_switch_event, net_demand, partition_islands, BusId, DeviceRole, Island, IslandFlow,
    NetworkError, NetworkModel,
};
use crate::scenario::{DeviceDoc, ScenarioDoc, ValidationErrors};
use crate::secondary::{mask, secondary_update, AttackSpec, SecondaryConfig};

pub use integrator::Integrator;
pub use metrics::{compute_metrics, Metrics, MetricsError, Thresholds};
pub use sweep::{size_sweep, SweepRow};
pub use trace::{DeviceSample, Trace, TraceRecord};

use integrator::{advance, Workspace};

/// When the DAC set-point is recomputed inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DacSampling {
    /// At every integrator stage, from the stage state.
    #[default]
    Stage,
    /// Once per step from the pre-step state, held through the step.
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub integrator: Integrator,
    /// Reserved for stochastic loads; runs are deterministic regardless.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    /// Island frequency below which every source in the island trips.
    #[serde(default = "default_source_trip")]
    pub source_trip_hz: f64,
    #[serde(default)]
    pub dac_sampling: DacSampling,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_stride() -> usize {
    10
}
fn default_source_trip() -> f64 {
    55.0
}

impl SimConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            dt: default_dt(),
            integrator: Integrator::Rk4,
            seed: 0,
            output_stride: default_stride(),
            source_trip_hz: default_source_trip(),
            dac_sampling: DacSampling::Stage,
        }
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    pub fn step_of(&self, t: f64) -> u64 {
        (t / self.dt).round().max(0.0) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub at: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn new(at: f64, kind: EventKind) -> Self {
        Self { at, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    BreakerOpen {
        line: String,
    },
    BreakerClose {
        line: String,
    },
    /// Adds to the bus load, pu on the network base.
    LoadStep {
        bus: BusId,
        dp: f64,
        #[serde(default)]
        dq: f64,
    },
    DgRedispatch {
        device: String,
        p_set: f64,
    },
    /// Scheduled from the attack window; opening captures the snapshot.
    AttackStart,
    AttackEnd,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Invalid(#[from] ValidationErrors),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Dac(#[from] DacError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub t: f64,
    pub device: String,
    pub cause: TripCause,
}

/// An energized island whose frequency fell through the source trip level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseRecord {
    pub t: f64,
    pub anchor: BusId,
    pub frequency: f64,
}

/// Substeps used to re-integrate a step in which a controller switches.
pub const EDGE_SUBSTEPS: usize = 64;

fn band_side(omega: f64, cfg: &DacConfig) -> i8 {
    if omega < cfg.omega_min {
        -1
    } else if omega > cfg.omega_max {
        1
    } else {
        0
    }
}

#[derive(Debug, Clone)]
struct GfmUnit {
    params: InverterParams,
    dac: DacConfig,
    q_inv: f64,
}

#[derive(Debug, Clone)]
struct DgUnit {
    params: DgParams,
    p_set: f64,
}

#[derive(Debug, Clone)]
enum Unit {
    Gfm(GfmUnit),
    Dg(DgUnit),
    Gfl(GflState),
}

#[derive(Debug, Clone)]
struct LiveIsland {
    island: Island,
    flow: Option<IslandFlow>,
    /// Angle-independent injection term for the current demand.
    offset: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    inj: Vec<f64>,
    ang: Vec<f64>,
    out: Vec<f64>,
}

/// Complete simulation state of one run.
#[derive(Debug, Clone)]
pub struct World {
    sim: SimConfig,
    network: NetworkModel,
    ids: Vec<String>,
    units: Vec<Unit>,
    tripped: Vec<bool>,
    /// Index of each source's first state; `usize::MAX` for injections.
    offset: Vec<usize>,
    x: Vec<f64>,
    islands: Vec<LiveIsland>,
    /// Secondary output per device (GFM entries only are meaningful).
    dispatch: Vec<f64>,
    /// Set-point reaching the inverter after the attack filter.
    delivered: Vec<f64>,
    secondary: SecondaryConfig,
    period_steps: Option<u64>,
    attack: Option<AttackSpec>,
    snapshot: Option<Vec<f64>>,
    events: Vec<(u64, Event)>,
    next_event: usize,
    k: u64,
    hold: BTreeMap<BusId, f64>,
    collapses: Vec<CollapseRecord>,
    trips: Vec<TripRecord>,
    monitor: Vec<BusId>,
    trace: Trace,
    ws: Workspace,
    scratch: Scratch,
    held: Vec<f64>,
    last_inputs: Vec<Option<DacInputs>>,
    last_decisions: Vec<Option<DacDecision>>,
}

/// Output of a complete run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub metrics: Metrics,
    pub collapses: Vec<CollapseRecord>,
    pub trips: Vec<TripRecord>,
    pub warnings: Vec<String>,
}

impl RunOutput {
    pub fn collapsed(&self) -> bool {
        !self.collapses.is_empty()
    }
}

/// Validates, simulates to `t_end` and summarizes.
pub fn run_scenario(doc: &ScenarioDoc) -> Result<RunOutput, EngineError> {
    let warnings = doc.validate()?;
    let mut world = World::new(doc)?;
    world.run()?;
    let metrics = compute_metrics(&world.trace, &doc.thresholds())?;
    Ok(RunOutput {
        trace: world.trace,
        metrics,
        collapses: world.collapses,
        trips: world.trips,
        warnings,
    })
}

impl World {
    /// Builds the initial state. The document must already be validated.
    pub fn new(doc: &ScenarioDoc) -> Result<Self, EngineError> {
        let network = doc.network_model();
        let n = doc.devices.len();
        let mut units = Vec::with_capacity(n);
        let mut ids = Vec::with_capacity(n);
        let mut offset = vec![usize::MAX; n];
        let mut dispatch = vec![0.0; n];
        let mut x = Vec::new();
        let mut omega_init = vec![None; n];
        for (d, dev) in doc.devices.iter().enumerate() {
            ids.push(dev.id().to_string());
            match dev {
                DeviceDoc::Gfm(g) => {
                    offset[d] = x.len();
                    let params = g.params();
                    x.extend([0.0, params.omega0]);
                    if params.tau_filter.is_some() {
                        x.push(g.p_set);
                    }
                    let mut dac = doc.dac.clone();
                    if let Some(floor) = g.p_set_min {
                        dac.p_set_min = floor;
                    }
                    dispatch[d] = g.p_set;
                    omega_init[d] = g.omega_init;
                    units.push(Unit::Gfm(GfmUnit {
                        params,
                        dac,
                        q_inv: g.q_inv,
                    }));
                }
                DeviceDoc::Dg(g) => {
                    offset[d] = x.len();
                    let params = g.params();
                    x.extend([0.0, params.omega0]);
                    if params.governor_lag > 0.0 {
                        x.push(g.p_set.clamp(params.p_min, params.p_max));
                    }
                    omega_init[d] = g.omega_init;
                    units.push(Unit::Dg(DgUnit {
                        params,
                        p_set: g.p_set,
                    }));
                }
                DeviceDoc::Gfl(g) => {
                    let mut s = GflState::new(g.rating, g.p_out);
                    s.f_trip = g.f_trip;
                    s.t_dwell = g.t_dwell;
                    units.push(Unit::Gfl(s));
                }
            }
        }

        let sim = doc.sim.clone();
        let mut events: Vec<(u64, Event)> = doc
            .events
            .iter()
            .map(|e| (sim.step_of(e.at), e.clone()))
            .collect();
        let attack = doc.secondary.attack.clone();
        if let Some(a) = &attack {
            events.push((sim.step_of(a.t_on), Event::new(a.t_on, EventKind::AttackStart)));
            events.push((sim.step_of(a.t_off), Event::new(a.t_off, EventKind::AttackEnd)));
        }
        // Stable: ties keep declaration order.
        events.sort_by_key(|(k, _)| *k);

        let period_steps = doc
            .secondary
            .enabled
            .then(|| ((doc.secondary.period / sim.dt).round() as u64).max(1));
        let monitor = doc.monitor_buses();
        let trace = Trace::new(ids.clone(), monitor.clone());

        let mut world = Self {
            sim,
            network,
            ids,
            units,
            tripped: vec![false; n],
            offset,
            x,
            islands: Vec::new(),
            delivered: dispatch.clone(),
            dispatch,
            secondary: doc.secondary.clone(),
            period_steps,
            attack,
            snapshot: None,
            events,
            next_event: 0,
            k: 0,
            hold: BTreeMap::new(),
            collapses: Vec::new(),
            trips: Vec::new(),
            monitor,
            trace,
            ws: Workspace::default(),
            scratch: Scratch::default(),
            held: vec![0.0; n],
            last_inputs: vec![None; n],
            last_decisions: vec![None; n],
        };
        world.rebuild()?;
        world.refresh_offsets();
        world.initialize_angles();
        for (d, w) in omega_init.into_iter().enumerate() {
            if let Some(w) = w {
                let o = world.offset[d];
                world.x[o + 1] = w;
            }
        }
        Ok(world)
    }

    /// Places source angles at the flow solution that delivers each source's
    /// dispatched set-point.
    fn initialize_angles(&mut self) {
        let base = self.network.base_kva;
        for isl in &self.islands {
            let Some(flow) = &isl.flow else { continue };
            let demand = self.island_demand(flow);
            let targets: Vec<f64> = flow
                .sources()
                .iter()
                .map(|&d| {
                    let p = match &self.units[d] {
                        Unit::Gfm(_) => self.dispatch[d],
                        Unit::Dg(g) => g.p_set,
                        Unit::Gfl(_) => 0.0,
                    };
                    p * self.network.placements[d].rating / base
                })
                .collect();
            let angles = flow.equilibrium_angles(&targets, &demand);
            for (k, &d) in flow.sources().iter().enumerate() {
                self.x[self.offset[d]] = angles[k];
            }
        }
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.sim.dt
    }

    pub fn step_index(&self) -> u64 {
        self.k
    }

    pub fn is_done(&self) -> bool {
        self.k >= self.sim.n_steps()
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    pub fn collapses(&self) -> &[CollapseRecord] {
        &self.collapses
    }

    pub fn trips(&self) -> &[TripRecord] {
        &self.trips
    }

    pub fn device_ids(&self) -> &[String] {
        &self.ids
    }

    /// Inputs each DAC saw at the start of the last step.
    pub fn last_dac_inputs(&self) -> &[Option<DacInputs>] {
        &self.last_inputs
    }

    pub fn last_dac_decisions(&self) -> &[Option<DacDecision>] {
        &self.last_decisions
    }

    /// Set-points currently delivered to the inverters.
    pub fn delivered_setpoints(&self) -> &[f64] {
        &self.delivered
    }

    /// Secondary output before the attack filter.
    pub fn dispatched_setpoints(&self) -> &[f64] {
        &self.dispatch
    }

    /// Current frequency of a source, Hz.
    pub fn device_frequency(&self, id: &str) -> Option<f64> {
        let d = self.ids.iter().position(|i| i == id)?;
        let o = self.offset[d];
        (o != usize::MAX).then(|| self.x[o + 1])
    }

    /// Island frequency at `bus`; `None` if the bus has no energized source.
    pub fn bus_frequency(&self, bus: BusId) -> Option<f64> {
        let isl = self
            .islands
            .iter()
            .find(|i| i.island.buses.binary_search(&bus).is_ok())?;
        self.frequency_of(isl, &self.x)
    }

    pub fn run(&mut self) -> Result<(), EngineError> {
        while !self.is_done() {
            self.step()?;
        }
        let n = self.sim.n_steps();
        if n % self.sim.output_stride as u64 == 0 {
            self.begin_step()?;
            self.record();
        }
        Ok(())
    }

    /// Advances one step of `dt`.
    pub fn step(&mut self) -> Result<(), EngineError> {
        self.begin_step()?;
        if self.k % self.sim.output_stride as u64 == 0 {
            self.record();
        }
        self.integrate();
        self.k += 1;
        self.end_step()
    }

    /// Events, secondary tick, attack filter and the pre-step DAC pass.
    fn begin_step(&mut self) -> Result<(), EngineError> {
        let k = self.k;
        let mut dirty = false;
        while let Some((at, ev)) = self.events.get(self.next_event) {
            if *at > k {
                break;
            }
            let ev = ev.clone();
            self.next_event += 1;
            dirty |= self.apply_event(&ev)?;
        }
        if dirty {
            self.rebuild()?;
        }

        if let Some(p) = self.period_steps {
            if k > 0 && k % p == 0 {
                self.secondary_tick();
            }
        }
        self.delivered = match (&self.attack, &self.snapshot) {
            (Some(a), Some(s)) => {
                let ids: Vec<&str> = self.ids.iter().map(String::as_str).collect();
                mask(&self.dispatch, &ids, a, s)
            }
            _ => self.dispatch.clone(),
        };

        self.refresh_offsets();
        let mut sc = std::mem::take(&mut self.scratch);
        self.fill_injections(&self.x, &mut sc);
        for d in 0..self.units.len() {
            self.last_inputs[d] = None;
            self.last_decisions[d] = None;
            if self.tripped[d] {
                continue;
            }
            if let Unit::Gfm(_) = &self.units[d] {
                let o = self.offset[d];
                let p_meas = self.measured_power(d, &self.x, &sc.inj);
                let (inputs, decision) = self.decide(d, self.x[o + 1], p_meas)?;
                self.held[d] = decision.p_set;
                self.last_inputs[d] = Some(inputs);
                self.last_decisions[d] = Some(decision);
            }
        }
        self.scratch = sc;
        Ok(())
    }

    fn integrate(&mut self) {
        let mut x = std::mem::take(&mut self.x);
        let mut ws = std::mem::take(&mut self.ws);
        let mut sc = std::mem::take(&mut self.scratch);
        let held = std::mem::take(&mut self.held);
        {
            let hold = match self.sim.dac_sampling {
                DacSampling::Stage => None,
                DacSampling::Step => Some(held.as_slice()),
            };
            let this = &*self;
            let x0 = x.clone();
            let dt = this.sim.dt;
            advance(this.sim.integrator, &mut x, dt, &mut ws, |s, ds| {
                this.derivatives(s, ds, &mut sc, hold)
            });
            // A band-edge crossing switches the controller mid-step; resolve it
            // on a finer grid so the overshoot shrinks with the substep.
            if hold.is_none() && this.crosses_band(&x0, &x) {
                x.copy_from_slice(&x0);
                let h = dt / EDGE_SUBSTEPS as f64;
                for _ in 0..EDGE_SUBSTEPS {
                    advance(this.sim.integrator, &mut x, h, &mut ws, |s, ds| {
                        this.derivatives(s, ds, &mut sc, hold)
                    });
                }
            }
        }
        self.x = x;
        self.ws = ws;
        self.scratch = sc;
        self.held = held;
    }

    fn crosses_band(&self, before: &[f64], after: &[f64]) -> bool {
        self.units.iter().enumerate().any(|(d, u)| match u {
            Unit::Gfm(g) if g.dac.enabled && !self.tripped[d] => {
                let o = self.offset[d] + 1;
                band_side(before[o], &g.dac) != band_side(after[o], &g.dac)
            }
            _ => false,
        })
    }

    /// Collapse detection, then the ride-through relays.
    fn end_step(&mut self) -> Result<(), EngineError> {
        let t = self.time();
        let mut collapsed_any = false;
        for i in 0..self.islands.len() {
            let Some(f) = self.frequency_of(&self.islands[i], &self.x) else {
                continue;
            };
            if f >= self.sim.source_trip_hz {
                continue;
            }
            let isl = self.islands[i].island.clone();
            for &d in &isl.devices {
                if self.network.placements[d].role == DeviceRole::Source && !self.tripped[d] {
                    self.trip_device(d, t, TripCause::UnderFrequency);
                }
            }
            for &b in &isl.buses {
                self.hold.insert(b, f);
            }
            self.collapses.push(CollapseRecord {
                t,
                anchor: isl.anchor(),
                frequency: f,
            });
            collapsed_any = true;
        }
        if collapsed_any {
            self.rebuild()?;
        }

        for i in 0..self.islands.len() {
            let Some(f) = self.frequency_of(&self.islands[i], &self.x) else {
                continue;
            };
            let devices = self.islands[i].island.devices.clone();
            for d in devices {
                let Unit::Gfl(state) = &self.units[d] else {
                    continue;
                };
                if state.tripped {
                    continue;
                }
                let next = gfl_frt_step(state, f, self.sim.dt)?;
                let now_tripped = next.tripped;
                self.units[d] = Unit::Gfl(next);
                if now_tripped {
                    self.tripped[d] = true;
                    self.trips.push(TripRecord {
                        t,
                        device: self.ids[d].clone(),
                        cause: TripCause::UnderFrequency,
                    });
                }
            }
        }
        Ok(())
    }

    fn trip_device(&mut self, d: usize, t: f64, cause: TripCause) {
        if self.tripped[d] {
            return;
        }
        self.tripped[d] = true;
        if let Unit::Gfl(s) = &mut self.units[d] {
            s.trip(cause);
        }
        self.trips.push(TripRecord {
            t,
            device: self.ids[d].clone(),
            cause,
        });
    }

    /// Returns whether the topology or source set changed.
    fn apply_event(&mut self, ev: &Event) -> Result<bool, EngineError> {
        match &ev.kind {
            EventKind::BreakerOpen { .. } | EventKind::BreakerClose { .. } => {
                self.network = apply_switch_event(&self.network, ev)?;
                Ok(true)
            }
            EventKind::LoadStep { .. } => {
                self.network = apply_switch_event(&self.network, ev)?;
                Ok(false)
            }
            EventKind::DgRedispatch { device, p_set } => {
                if let Some(d) = self.ids.iter().position(|i| i == device) {
                    if let Unit::Dg(g) = &mut self.units[d] {
                        g.p_set = *p_set;
                    }
                }
                Ok(false)
            }
            EventKind::AttackStart => {
                self.snapshot = Some(self.delivered.clone());
                Ok(false)
            }
            EventKind::AttackEnd => {
                self.snapshot = None;
                Ok(false)
            }
        }
    }

    fn rebuild(&mut self) -> Result<(), EngineError> {
        let active: Vec<usize> = (0..self.units.len())
            .filter(|&d| self.network.placements[d].role == DeviceRole::Source && !self.tripped[d])
            .collect();
        let mut islands = Vec::new();
        for island in partition_islands(&self.network) {
            let flow = IslandFlow::compile(&self.network, &island, &active)?;
            islands.push(LiveIsland {
                island,
                flow,
                offset: Vec::new(),
            });
        }
        let t = self.time();
        for isl in &islands {
            if isl.flow.is_some() {
                for b in &isl.island.buses {
                    self.hold.remove(b);
                }
                continue;
            }
            for &d in &isl.island.devices {
                if matches!(self.units[d], Unit::Gfl(_)) {
                    self.trip_device(d, t, TripCause::Deenergized);
                }
            }
        }
        self.islands = islands;
        Ok(())
    }

    fn island_demand(&self, flow: &IslandFlow) -> Vec<f64> {
        let base = self.network.base_kva;
        net_demand(&self.network, flow.buses(), |dev| {
            let d = self.ids.iter().position(|i| i == dev)?;
            match &self.units[d] {
                Unit::Gfl(s) => Some(s.injection() * s.rating / base),
                _ => None,
            }
        })
    }

    fn refresh_offsets(&mut self) {
        for i in 0..self.islands.len() {
            let offset = match &self.islands[i].flow {
                Some(flow) => flow.demand_offset(&self.island_demand(flow)),
                None => Vec::new(),
            };
            self.islands[i].offset = offset;
        }
    }

    fn frequency_of(&self, isl: &LiveIsland, x: &[f64]) -> Option<f64> {
        let flow = isl.flow.as_ref()?;
        crate::network::island_frequency(flow.sources().iter().map(|&d| {
            (self.network.placements[d].rating, x[self.offset[d] + 1])
        }))
    }

    /// Source injections in device pu for state `x`, into `sc.inj`.
    fn fill_injections(&self, x: &[f64], sc: &mut Scratch) {
        let base = self.network.base_kva;
        sc.inj.clear();
        sc.inj.resize(self.units.len(), 0.0);
        for isl in &self.islands {
            let Some(flow) = &isl.flow else { continue };
            sc.ang.clear();
            sc.ang.extend(flow.sources().iter().map(|&d| x[self.offset[d]]));
            sc.out.resize(sc.ang.len(), 0.0);
            flow.injections_with(&sc.ang, &isl.offset, &mut sc.out);
            for (k, &d) in flow.sources().iter().enumerate() {
                sc.inj[d] = sc.out[k] * base / self.network.placements[d].rating;
            }
        }
    }

    fn measured_power(&self, d: usize, x: &[f64], inj: &[f64]) -> f64 {
        match &self.units[d] {
            Unit::Gfm(g) if g.params.tau_filter.is_some() => x[self.offset[d] + 2],
            _ => inj[d],
        }
    }

    fn decide(
        &self,
        d: usize,
        omega: f64,
        p_meas: f64,
    ) -> Result<(DacInputs, DacDecision), DacError> {
        let Unit::Gfm(g) = &self.units[d] else {
            unreachable!("DAC runs on grid-forming inverters only");
        };
        let inputs = DacInputs {
            omega,
            p_inv: p_meas,
            q_inv: g.q_inv,
            p_set_star: self.delivered[d],
        };
        let decision = dac_compute(&inputs, &g.params, &g.dac)?;
        Ok((inputs, decision))
    }

    fn derivatives(&self, x: &[f64], dx: &mut [f64], sc: &mut Scratch, held: Option<&[f64]>) {
        dx.fill(0.0);
        self.fill_injections(x, sc);
        for (d, unit) in self.units.iter().enumerate() {
            if self.tripped[d] {
                continue;
            }
            let o = self.offset[d];
            match unit {
                Unit::Gfm(g) => {
                    let omega = x[o + 1];
                    let p_meas = self.measured_power(d, x, &sc.inj);
                    let p_set = match held {
                        Some(h) => h[d],
                        None => {
                            self.decide(d, omega, p_meas)
                                .expect("reactive loading checked at validation")
                                .1
                                .p_set
                        }
                    };
                    let p = &g.params;
                    let p_eff = rating_limited_setpoint(p_set, omega, p.omega0, p.m_p, p.p_min, p.p_max);
                    let state = GfmState {
                        omega,
                        ..GfmState::default()
                    };
                    let (dd, dw) = gfm_derivatives(&state, p, p_eff, p_meas);
                    dx[o] = dd;
                    dx[o + 1] = dw;
                    if let Some(tf) = p.tau_filter {
                        dx[o + 2] = (sc.inj[d] - x[o + 2]) / tf;
                    }
                }
                Unit::Dg(g) => {
                    let p = &g.params;
                    let mut state = DgState {
                        omega: x[o + 1],
                        ..DgState::default()
                    };
                    if p.governor_lag > 0.0 {
                        state.p_mech = x[o + 2];
                        let (dd, dw, dm) = dg_governed_derivatives(&state, p, g.p_set, sc.inj[d]);
                        dx[o] = dd;
                        dx[o + 1] = dw;
                        dx[o + 2] = dm;
                    } else {
                        let p_eff =
                            rating_limited_setpoint(g.p_set, state.omega, p.omega0, p.droop, p.p_min, p.p_max);
                        let (dd, dw) = dg_derivatives(&state, p, p_eff, sc.inj[d]);
                        dx[o] = dd;
                        dx[o + 1] = dw;
                    }
                }
                Unit::Gfl(_) => {}
            }
        }
    }

    fn secondary_tick(&mut self) {
        for i in 0..self.islands.len() {
            let Some(f) = self.frequency_of(&self.islands[i], &self.x) else {
                continue;
            };
            let members: Vec<usize> = self.islands[i]
                .island
                .devices
                .iter()
                .copied()
                .filter(|&d| !self.tripped[d] && matches!(self.units[d], Unit::Gfm(_)))
                .collect();
            let Some(&first) = members.first() else { continue };
            let Unit::Gfm(g) = &self.units[first] else { unreachable!() };
            let omega0 = g.params.omega0;
            let ratings: Vec<f64> = members.iter().map(|&d| self.network.placements[d].rating).collect();
            let current: Vec<f64> = members.iter().map(|&d| self.dispatch[d]).collect();
            let next = secondary_update(f, omega0, &self.secondary, &ratings, &current);
            for (k, &d) in members.iter().enumerate() {
                self.dispatch[d] = next[k];
            }
        }
    }

    fn record(&mut self) {
        let t = self.time();
        let bus_f = |w: &World, b: BusId| -> f64 {
            w.bus_frequency(b)
                .or_else(|| w.hold.get(&b).copied())
                .unwrap_or(f64::NAN)
        };
        let mut devices = Vec::with_capacity(self.units.len());
        for (d, unit) in self.units.iter().enumerate() {
            let o = self.offset[d];
            let sample = match unit {
                Unit::Gfm(g) => {
                    let decision = self.last_decisions[d];
                    DeviceSample {
                        omega: self.x[o + 1],
                        p_inv: if self.tripped[d] { 0.0 } else { self.scratch.inj[d] },
                        q_inv: g.q_inv,
                        p_set_star: self.delivered[d],
                        p_set_applied: decision.map_or(0.0, |dd| dd.p_set),
                        dac: decision.map_or(DacMode::Passthrough, |dd| dd.active),
                        tripped: self.tripped[d],
                    }
                }
                Unit::Dg(g) => DeviceSample {
                    omega: self.x[o + 1],
                    p_inv: if self.tripped[d] { 0.0 } else { self.scratch.inj[d] },
                    q_inv: 0.0,
                    p_set_star: g.p_set,
                    p_set_applied: g.p_set,
                    dac: DacMode::Passthrough,
                    tripped: self.tripped[d],
                },
                Unit::Gfl(s) => {
                    let p = s.injection();
                    DeviceSample {
                        omega: bus_f(self, self.network.placements[d].bus),
                        p_inv: p,
                        q_inv: 0.0,
                        p_set_star: p,
                        p_set_applied: p,
                        dac: DacMode::Passthrough,
                        tripped: s.tripped,
                    }
                }
            };
            devices.push(sample);
        }
        let bus_freq = self.monitor.iter().map(|&b| bus_f(self, b)).collect();
        self.trace.records.push(TraceRecord {
            t,
            devices,
            bus_freq,
            collapsed: !self.collapses.is_empty(),
        });
    }
}
