//! Loss of a large region after redispatch: relay trips and frequency
//! collapse without the controller, a saturated but stable inverter with it.
//!
//! cargo run --release --example large_disturbance

use dacgrid::engine::run_scenario;
use dacgrid::scenario::load_bundled;

fn main() {
    let doc = load_bundled("large_disturbance").unwrap();
    for on in [false, true] {
        let mut d = doc.clone();
        d.dac.enabled = on;
        let run = run_scenario(&d).expect("run");
        println!("dac {}", if on { "on" } else { "off" });
        println!(
            "  nadir {:.3} Hz, below {} Hz for {:.2} s",
            run.metrics.nadir,
            d.metrics.violation_hz,
            run.metrics.violation_time
        );
        for t in &run.trips {
            println!("  {:>7.3} s  {} tripped ({:?})", t.t, t.device, t.cause);
        }
        for c in &run.collapses {
            println!("  {:>7.3} s  island at bus {} collapsed at {:.3} Hz", c.t, c.anchor, c.frequency);
        }
        let peak = run
            .trace
            .device_series("gfm1")
            .unwrap()
            .iter()
            .map(|(_, s)| s.p_set_applied)
            .fold(f64::MIN, f64::max);
        println!("  gfm1 peak applied set-point {peak:.3} pu\n");
    }
}
