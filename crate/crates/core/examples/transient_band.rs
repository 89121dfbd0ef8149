//! Islanding and reconnection with and without the safety controller.
//!
//! cargo run --release --example transient_band [OUT_DIR]
//!
//! With `OUT_DIR`, both traces are written as CSV.

use std::path::PathBuf;

use dacgrid::engine::run_scenario;
use dacgrid::scenario::load_bundled;

fn main() {
    let out_dir = std::env::args().nth(1).map(PathBuf::from);
    let doc = load_bundled("transient_band").unwrap();
    let bus = doc.monitor_bus();

    let mut series = Vec::new();
    for on in [true, false] {
        let mut d = doc.clone();
        d.dac.enabled = on;
        let run = run_scenario(&d).expect("run");
        let m = &run.metrics;
        println!(
            "dac {:<3}  settled {:.4} Hz  nadir {:.4}  peak {:.4}  in band {:.1}%",
            if on { "on" } else { "off" },
            m.settled_frequency,
            m.nadir,
            m.peak,
            100.0 * m.safe_band_occupancy
        );
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir).unwrap();
            let path = dir.join(format!("transient_band_dac_{}.csv", if on { "on" } else { "off" }));
            std::fs::write(&path, run.trace.to_csv_string()).unwrap();
        }
        series.push(run.trace.bus_series(bus).unwrap());
    }

    println!("\n{:>6} {:>10} {:>10}", "t (s)", "dac on", "dac off");
    for (a, b) in series[0].iter().zip(&series[1]).step_by(50) {
        println!("{:>6.1} {:>10.4} {:>10.4}", a.0, a.1, b.1);
    }
}
