//! Reduced lossless network: breaker topology, island partitioning and a
//! linear angle-based power flow.
//!
//! Grid-forming inverters and generators are angle sources. Loads and
//! grid-following injections are netted into bus demand. Powers here are
//! per-unit on the network base (`base_kva`); conversion to device bases
//! happens at the edge.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Event, EventKind};

pub type BusId = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("unknown line `{0}`")]
    UnknownLine(String),
    #[error("line `{0}` must have positive susceptance")]
    NonPositiveSusceptance(String),
    #[error("duplicate device id `{0}`")]
    DuplicateDevice(String),
    #[error("bus {0} hosts more than one frequency source")]
    SharedSourceBus(BusId),
    #[error("singular reduced network in island starting at bus {0}")]
    Singular(BusId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from: BusId,
    pub to: BusId,
    /// Susceptance, pu on the network base.
    pub b: f64,
    #[serde(default = "closed")]
    pub closed: bool,
}

fn closed() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceRole {
    /// Frequency source (grid-forming inverter or generator).
    Source,
    /// Power injection (grid-following inverter).
    Injection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub device: String,
    pub bus: BusId,
    pub role: DeviceRole,
    /// kVA, used for base conversion and frequency weighting.
    pub rating: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BusLoad {
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub base_kva: f64,
    pub buses: Vec<BusId>,
    pub lines: Vec<Line>,
    pub placements: Vec<Placement>,
    pub loads: BTreeMap<BusId, BusLoad>,
}

impl NetworkModel {
    pub fn validate(&self) -> Result<(), Vec<NetworkError>> {
        let mut errors = Vec::new();
        let known = |b: BusId| self.buses.contains(&b);
        for line in &self.lines {
            for end in [line.from, line.to] {
                if !known(end) {
                    errors.push(NetworkError::UnknownBus(end));
                }
            }
            if !(line.b > 0.0) {
                errors.push(NetworkError::NonPositiveSusceptance(line.id.clone()));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut source_buses = std::collections::BTreeSet::new();
        for p in &self.placements {
            if !seen.insert(p.device.as_str()) {
                errors.push(NetworkError::DuplicateDevice(p.device.clone()));
            }
            if !known(p.bus) {
                errors.push(NetworkError::UnknownBus(p.bus));
            }
            if p.role == DeviceRole::Source && !source_buses.insert(p.bus) {
                errors.push(NetworkError::SharedSourceBus(p.bus));
            }
        }
        for bus in self.loads.keys() {
            if !known(*bus) {
                errors.push(NetworkError::UnknownBus(*bus));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn bus_index(&self, bus: BusId) -> Option<usize> {
        self.buses.iter().position(|&b| b == bus)
    }

    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    pub fn load_at(&self, bus: BusId) -> BusLoad {
        self.loads.get(&bus).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Island {
    /// Sorted ascending.
    pub buses: Vec<BusId>,
    /// Indices into `NetworkModel::placements`, in declaration order.
    pub devices: Vec<usize>,
    pub has_source: bool,
}

impl Island {
    pub fn anchor(&self) -> BusId {
        self.buses[0]
    }
}

/// Connected components over closed breakers, ordered by smallest member bus.
pub fn partition_islands(model: &NetworkModel) -> Vec<Island> {
    let n = model.buses.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for line in model.lines.iter().filter(|l| l.closed) {
        let (Some(a), Some(b)) = (model.bus_index(line.from), model.bus_index(line.to)) else {
            continue;
        };
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }

    let mut groups: BTreeMap<usize, Vec<BusId>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(model.buses[i]);
    }
    let mut islands: Vec<Island> = groups
        .into_values()
        .map(|mut buses| {
            buses.sort_unstable();
            let devices: Vec<usize> = model
                .placements
                .iter()
                .enumerate()
                .filter(|(_, p)| buses.binary_search(&p.bus).is_ok())
                .map(|(i, _)| i)
                .collect();
            let has_source = devices
                .iter()
                .any(|&d| model.placements[d].role == DeviceRole::Source);
            Island {
                buses,
                devices,
                has_source,
            }
        })
        .collect();
    islands.sort_by_key(|isl| isl.anchor());
    islands
}

/// Precomputed flow solution for one energized island.
///
/// Non-source buses are eliminated once per topology, so each evaluation is a
/// couple of small matrix-vector products.
#[derive(Debug, Clone)]
pub struct IslandFlow {
    buses: Vec<BusId>,
    /// Placement index of each source, aligned with `source_buses`.
    sources: Vec<usize>,
    /// Local bus index of each source.
    source_buses: Vec<usize>,
    /// Local bus indices without a source.
    load_buses: Vec<usize>,
    laplacian: DMatrix<f64>,
    /// `B_LL⁻¹`
    inv_ll: DMatrix<f64>,
    /// `−B_LL⁻¹ B_LS`
    gain_ls: DMatrix<f64>,
    /// Kron-reduced source admittance `B_SS + B_SL·gain_ls`.
    reduced: DMatrix<f64>,
}

impl IslandFlow {
    /// `active_sources` lists placement indices of sources still in service.
    pub fn compile(
        model: &NetworkModel,
        island: &Island,
        active_sources: &[usize],
    ) -> Result<Option<Self>, NetworkError> {
        let buses = island.buses.clone();
        let local = |b: BusId| buses.binary_search(&b).ok();
        let n = buses.len();

        let mut laplacian = DMatrix::<f64>::zeros(n, n);
        for line in model.lines.iter().filter(|l| l.closed) {
            let (Some(i), Some(j)) = (local(line.from), local(line.to)) else {
                continue;
            };
            if i == j {
                continue;
            }
            laplacian[(i, i)] += line.b;
            laplacian[(j, j)] += line.b;
            laplacian[(i, j)] -= line.b;
            laplacian[(j, i)] -= line.b;
        }

        let mut sources = Vec::new();
        let mut source_buses = Vec::new();
        for &d in &island.devices {
            let p = &model.placements[d];
            if p.role == DeviceRole::Source && active_sources.contains(&d) {
                sources.push(d);
                source_buses.push(local(p.bus).expect("device bus in island"));
            }
        }
        if sources.is_empty() {
            return Ok(None);
        }
        let load_buses: Vec<usize> = (0..n).filter(|i| !source_buses.contains(i)).collect();

        let nl = load_buses.len();
        let ns = source_buses.len();
        let b_ll = DMatrix::from_fn(nl, nl, |r, c| laplacian[(load_buses[r], load_buses[c])]);
        let b_ls = DMatrix::from_fn(nl, ns, |r, c| laplacian[(load_buses[r], source_buses[c])]);
        let inv_ll = if nl == 0 {
            DMatrix::zeros(0, 0)
        } else {
            b_ll
                .try_inverse()
                .ok_or(NetworkError::Singular(island.anchor()))?
        };
        let gain_ls = -(&inv_ll * b_ls);
        let b_ss = DMatrix::from_fn(ns, ns, |r, c| laplacian[(source_buses[r], source_buses[c])]);
        let b_sl = DMatrix::from_fn(ns, nl, |r, c| laplacian[(source_buses[r], load_buses[c])]);
        let reduced = b_ss + b_sl * &gain_ls;
        Ok(Some(Self {
            buses,
            sources,
            source_buses,
            load_buses,
            laplacian,
            inv_ll,
            gain_ls,
            reduced,
        }))
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn buses(&self) -> &[BusId] {
        &self.buses
    }

    /// Local index of each load bus, paired with its id.
    pub fn load_bus_ids(&self) -> impl Iterator<Item = BusId> + '_ {
        self.load_buses.iter().map(|&i| self.buses[i])
    }

    /// Source injections (network pu) for source angles aligned with `sources()`.
    ///
    /// `net_demand` is indexed like `buses()`: load minus grid-following output.
    pub fn solve(&self, source_angles: &[f64], net_demand: &[f64], out: &mut [f64]) {
        let ns = self.sources.len();
        debug_assert_eq!(source_angles.len(), ns);
        debug_assert_eq!(out.len(), ns);
        let n = self.buses.len();
        let mut theta = vec![0.0; n];
        for (k, &i) in self.source_buses.iter().enumerate() {
            theta[i] = source_angles[k];
        }
        if !self.load_buses.is_empty() {
            let p_l = DVector::from_iterator(
                self.load_buses.len(),
                self.load_buses.iter().map(|&i| -net_demand[i]),
            );
            let th_s = DVector::from_column_slice(source_angles);
            let th_l = &self.inv_ll * p_l + &self.gain_ls * th_s;
            for (k, &i) in self.load_buses.iter().enumerate() {
                theta[i] = th_l[k];
            }
        }
        for (k, &i) in self.source_buses.iter().enumerate() {
            let flow: f64 = (0..n).map(|j| self.laplacian[(i, j)] * theta[j]).sum();
            out[k] = flow + net_demand[i];
        }
    }

    /// Angle-independent part of the source injections for a given demand.
    ///
    /// With it, `injections(θ) = reduced·θ + offset`, which is what
    /// [`IslandFlow::injections_with`] evaluates.
    pub fn demand_offset(&self, net_demand: &[f64]) -> Vec<f64> {
        let zeros = vec![0.0; self.sources.len()];
        let mut out = vec![0.0; self.sources.len()];
        self.solve(&zeros, net_demand, &mut out);
        out
    }

    /// Same result as [`IslandFlow::solve`] given a precomputed offset.
    pub fn injections_with(&self, source_angles: &[f64], offset: &[f64], out: &mut [f64]) {
        let ns = self.sources.len();
        for r in 0..ns {
            let mut acc = offset[r];
            for c in 0..ns {
                acc += self.reduced[(r, c)] * source_angles[c];
            }
            out[r] = acc;
        }
    }

    /// Bus angles that make every source inject `targets` (network pu), with
    /// the first source as angle reference. The reference absorbs any mismatch.
    pub fn equilibrium_angles(&self, targets: &[f64], net_demand: &[f64]) -> Vec<f64> {
        let n = self.buses.len();
        let mut p = vec![0.0; n];
        for &i in &self.load_buses {
            p[i] = -net_demand[i];
        }
        for (k, &i) in self.source_buses.iter().enumerate() {
            p[i] = targets[k] - net_demand[i];
        }
        let reference = self.source_buses[0];
        let others: Vec<usize> = (0..n).filter(|&i| i != reference).collect();
        let mut theta = vec![0.0; n];
        if !others.is_empty() {
            let m = others.len();
            let b = DMatrix::from_fn(m, m, |r, c| self.laplacian[(others[r], others[c])]);
            let rhs = DVector::from_iterator(m, others.iter().map(|&i| p[i]));
            if let Some(sol) = b.lu().solve(&rhs) {
                for (k, &i) in others.iter().enumerate() {
                    theta[i] = sol[k];
                }
            }
        }
        self.source_buses.iter().map(|&i| theta[i]).collect()
    }
}

/// Device injections for a full network.
///
/// `source_angles` maps source device ids to angles; `gfl_output` maps
/// grid-following device ids to their output in network pu. Returns the
/// injection of every source in its own per-unit base, plus the anchors of
/// islands that carry load but have no source.
pub fn dc_injections(
    model: &NetworkModel,
    source_angles: &BTreeMap<String, f64>,
    gfl_output: &BTreeMap<String, f64>,
) -> Result<(BTreeMap<String, f64>, Vec<BusId>), NetworkError> {
    let mut injections = BTreeMap::new();
    let mut unsupplied = Vec::new();
    let active: Vec<usize> = model
        .placements
        .iter()
        .enumerate()
        .filter(|(_, p)| p.role == DeviceRole::Source && source_angles.contains_key(&p.device))
        .map(|(i, _)| i)
        .collect();
    for island in partition_islands(model) {
        let Some(flow) = IslandFlow::compile(model, &island, &active)? else {
            let has_load = island.buses.iter().any(|b| model.load_at(*b).p != 0.0);
            if has_load {
                unsupplied.push(island.anchor());
            }
            continue;
        };
        let demand = net_demand(model, flow.buses(), |dev| gfl_output.get(dev).copied());
        let angles: Vec<f64> = flow
            .sources()
            .iter()
            .map(|&d| source_angles[&model.placements[d].device])
            .collect();
        let mut out = vec![0.0; angles.len()];
        flow.solve(&angles, &demand, &mut out);
        for (k, &d) in flow.sources().iter().enumerate() {
            let p = &model.placements[d];
            injections.insert(p.device.clone(), out[k] * model.base_kva / p.rating);
        }
    }
    Ok((injections, unsupplied))
}

/// Load minus grid-following output at each bus, network pu.
pub fn net_demand(
    model: &NetworkModel,
    buses: &[BusId],
    gfl_output: impl Fn(&str) -> Option<f64>,
) -> Vec<f64> {
    buses
        .iter()
        .map(|&b| {
            let gen: f64 = model
                .placements
                .iter()
                .filter(|p| p.bus == b && p.role == DeviceRole::Injection)
                .filter_map(|p| gfl_output(&p.device))
                .sum();
            model.load_at(b).p - gen
        })
        .collect()
}

/// Rating-weighted mean frequency of the given `(rating, omega)` sources.
pub fn island_frequency(sources: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let (num, den) = sources
        .into_iter()
        .fold((0.0, 0.0), |(n, d), (rating, omega)| (n + rating * omega, d + rating));
    (den > 0.0).then(|| num / den)
}

/// Applies a breaker or load event. Other event kinds leave the network unchanged.
pub fn apply_switch_event(model: &NetworkModel, event: &Event) -> Result<NetworkModel, NetworkError> {
    let mut next = model.clone();
    match &event.kind {
        EventKind::BreakerOpen { line } | EventKind::BreakerClose { line } => {
            let idx = next
                .line_index(line)
                .ok_or_else(|| NetworkError::UnknownLine(line.clone()))?;
            next.lines[idx].closed = matches!(event.kind, EventKind::BreakerClose { .. });
        }
        EventKind::LoadStep { bus, dp, dq } => {
            if next.bus_index(*bus).is_none() {
                return Err(NetworkError::UnknownBus(*bus));
            }
            let load = next.loads.entry(*bus).or_default();
            load.p += dp;
            load.q += dq;
        }
        _ => {}
    }
    Ok(next)
}
