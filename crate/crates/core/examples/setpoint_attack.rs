//! Secondary dispatch with two inverters receiving frozen set-points during
//! an attack window.
//!
//! cargo run --release --example setpoint_attack

use dacgrid::engine::run_scenario;
use dacgrid::scenario::load_bundled;

fn main() {
    let doc = load_bundled("setpoint_attack").unwrap();
    let attack = doc.secondary.attack.clone().unwrap();
    println!(
        "attack on {:?} from {} s to {} s\n",
        attack.targets, attack.t_on, attack.t_off
    );
    for on in [false, true] {
        let mut d = doc.clone();
        d.dac.enabled = on;
        let run = run_scenario(&d).expect("run");
        let th = d.thresholds();
        let occ = dacgrid::engine::metrics::occupancy_between(&run.trace, &th, attack.t_on, attack.t_off)
            .unwrap_or(f64::NAN);
        println!(
            "dac {}: in band {:.1}% of the attack window, range {:.3}..{:.3} Hz",
            if on { "on" } else { "off" },
            100.0 * occ,
            run.metrics.nadir,
            run.metrics.peak
        );
        let ids = ["gfm1", "gfm2", "gfm3"];
        let idx: Vec<usize> = ids.iter().map(|id| run.trace.device_index(id).unwrap()).collect();
        let bus = run.trace.bus_column(d.monitor_bus()).unwrap();
        println!("{:>6} {:>9}   dispatched / applied set-points", "t (s)", "f (Hz)");
        for r in run.trace.records.iter().step_by(200) {
            let cols: Vec<String> = idx
                .iter()
                .map(|&i| format!("{:.3}/{:.3}", r.devices[i].p_set_star, r.devices[i].p_set_applied))
                .collect();
            println!("{:>6.1} {:>9.4}   {}", r.t, r.bus_freq[bus], cols.join("  "));
        }
        println!();
    }
}
