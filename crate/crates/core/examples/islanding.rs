//! Breaker actions on the bundled feeder: islands, their sources, and how
//! the load is shared by angle-based flow.
//!
//! cargo run --example islanding

use std::collections::BTreeMap;

use dacgrid::engine::{Event, EventKind};
use dacgrid::network::{apply_switch_event, dc_injections, partition_islands, DeviceRole, NetworkModel};
use dacgrid::scenario::load_bundled;

fn show(title: &str, model: &NetworkModel) {
    println!("{title}");
    for island in partition_islands(model) {
        let devices: Vec<&str> = island
            .devices
            .iter()
            .map(|&d| model.placements[d].device.as_str())
            .collect();
        let load: f64 = island.buses.iter().map(|b| model.load_at(*b).p).sum();
        println!(
            "  buses {:?}  load {:.2} pu  source {}  devices {:?}",
            island.buses, load, island.has_source, devices
        );
    }
    let angles: BTreeMap<String, f64> = model
        .placements
        .iter()
        .filter(|p| p.role == DeviceRole::Source)
        .map(|p| (p.device.clone(), 0.0))
        .collect();
    let gfl: BTreeMap<String, f64> = model
        .placements
        .iter()
        .filter(|p| p.role == DeviceRole::Injection)
        .map(|p| (p.device.clone(), p.rating / model.base_kva))
        .collect();
    let (inj, unsupplied) = dc_injections(model, &angles, &gfl).expect("consistent network");
    for (id, p) in &inj {
        println!("    {id:<5} {p:>7.3} pu at equal angles");
    }
    if !unsupplied.is_empty() {
        println!("    no source for islands anchored at {unsupplied:?}");
    }
    println!();
}

fn main() {
    let doc = load_bundled("transient_band").unwrap();
    let mut model = doc.network_model();
    show("all breakers closed", &model);
    for line in ["pcc", "r4_tie"] {
        let ev = Event::new(1.0, EventKind::BreakerOpen { line: line.into() });
        model = apply_switch_event(&model, &ev).unwrap();
    }
    show("pcc and r4_tie open", &model);
}
