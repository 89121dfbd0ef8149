mod common;

use dacgrid::engine::{run_scenario, EventKind, World};
use dacgrid::scenario::{load_bundled, parse_and_validate, ScenarioDoc};
use serde_json::json;

fn two_gfm_island(secondary: serde_json::Value, t_end: f64) -> ScenarioDoc {
    let doc = json!({
        "name": "two_gfm",
        "sim": { "t_end": t_end, "output_stride": 100 },
        "network": {
            "base_kva": 100.0,
            "buses": [1, 2, 3],
            "lines": [
                { "id": "a", "from": 1, "to": 2, "b": 10.0 },
                { "id": "b", "from": 2, "to": 3, "b": 10.0 }
            ],
            "loads": [{ "bus": 2, "p": 2.0 }]
        },
        "devices": [
            { "kind": "gfm", "id": "gfm1", "bus": 1, "s_inv": 100.0, "m_p": 1.0, "tau": 0.05, "p_set": 0.2 },
            { "kind": "gfm", "id": "gfm2", "bus": 3, "s_inv": 200.0, "m_p": 1.0, "tau": 0.05, "p_set": 0.5 }
        ],
        "dac": { "enabled": false },
        "secondary": secondary,
        "metrics": { "monitor_bus": 2 }
    });
    parse_and_validate(&doc.to_string()).unwrap().doc
}

#[test]
fn balanced_start_does_not_drift() {
    let mut doc = load_bundled("transient_band").unwrap();
    doc.events.clear();
    doc.sim.t_end = 5.0;
    let out = run_scenario(&doc).unwrap();
    for (t, f) in out.trace.bus_series(doc.monitor_bus()).unwrap() {
        assert!((f - 60.0).abs() < 1e-9, "t = {t}: {f}");
    }
}

#[test]
fn frozen_control_holds_frequency() {
    let doc = common::single_gfm(0.5, 0.5, 60.0, json!({}), json!({ "enabled": false }), 2.0);
    let out = run_scenario(&doc).unwrap();
    for (_, s) in out.trace.device_series("gfm1").unwrap() {
        assert!((s.omega - 60.0).abs() < 1e-12);
        assert!((s.p_inv - 0.5).abs() < 1e-12);
    }
}

#[test]
fn controller_sees_pre_step_state() {
    let doc = common::single_gfm(
        0.5,
        0.2,
        59.8,
        json!({}),
        json!({ "enabled": true, "alpha": 50.0 }),
        1.0,
    );
    let mut world = World::new(&doc).unwrap();
    for k in 0..20 {
        let before = world.device_frequency("gfm1").unwrap();
        world.step().unwrap();
        let seen = world.last_dac_inputs()[0].expect("gfm has controller inputs");
        assert_eq!(seen.omega, before, "step {k}");
        assert_eq!(seen.p_set_star, world.delivered_setpoints()[0]);
        let rec = &world.trace().records[k];
        assert_eq!(rec.devices[0].omega, before);
    }
}

#[test]
fn repeated_runs_are_identical() {
    let doc = load_bundled("setpoint_attack").unwrap();
    let a = run_scenario(&doc).unwrap();
    let b = run_scenario(&doc).unwrap();
    assert_eq!(a.trace.to_csv_string(), b.trace.to_csv_string());
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn secondary_restores_frequency_and_sharing() {
    let doc = two_gfm_island(json!({ "enabled": true, "period": 1.0, "k_i": 0.5, "rounds": 3 }), 30.0);
    let out = run_scenario(&doc).unwrap();
    let last = out.trace.records.last().unwrap();
    let f = last.bus_freq[0];
    assert!((f - 60.0).abs() < 1e-3, "frequency {f}");
    let (p1, p2) = (last.devices[0].p_inv, last.devices[1].p_inv);
    assert!((p1 - p2).abs() < 1e-3, "per-unit sharing {p1} vs {p2}");

    let open = run_scenario(&two_gfm_island(json!({ "enabled": false }), 30.0)).unwrap();
    let f_open = open.trace.records.last().unwrap().bus_freq[0];
    assert!(f_open < 59.8, "without dispatcher {f_open}");
}

#[test]
fn isolated_loaded_region_is_deenergized_not_collapsed() {
    let doc = load_bundled("transient_band").unwrap();
    let out = run_scenario(&doc).unwrap();
    assert!(out.collapses.is_empty());
    let dead: Vec<&str> = out.trips.iter().map(|t| t.device.as_str()).collect();
    assert_eq!(dead, ["gfl1", "gfl2"]);
    assert!(out.trips.iter().all(|t| (t.t - 1.0).abs() < 1e-9));
}

#[test]
fn simultaneous_events_apply_in_file_order() {
    let mut doc = load_bundled("transient_band").unwrap();
    doc.sim.t_end = 2.0;
    doc.events.retain(|e| e.at < 2.0);
    doc.events.push(dacgrid::engine::Event::new(1.0, EventKind::BreakerClose { line: "r4_tie".into() }));
    let out = run_scenario(&doc).unwrap();
    assert!(out.trips.is_empty(), "r4 re-closed in the same step: {:?}", out.trips);
}
